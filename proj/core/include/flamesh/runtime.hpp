#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flamesh/net_backend.hpp"
#include "flamesh/transport.hpp"
#include "flamesh/wire.hpp"

namespace flamesh {

/// (localData, privateData, msg) -> update. Must not depend on anything but
/// its arguments.
using ClientCallback = std::function<FlData(const FlData&, const FlData&, const FlData&)>;

/// (privateData, msgs) -> aggregate. The order of msgs is arrival order, so
/// the result should not depend on it.
using ServerCallback = std::function<FlData(const FlData&, const std::vector<FlData>&)>;

struct TestbedOptions {
  /// Address this node listens on. Empty means "same as the master IP".
  std::string self_ip;
  RetryPolicy retry;
  Timeout recv_timeout = kDefaultRecvTimeout;
};

/// Message counts for one iteration of fl_centralized / fl_decentralized.
struct IterationStats {
  std::int64_t sent = 0;
  std::int64_t processed = 0;
};

/// Counters the tests and the acceptance suite look at.
struct TestbedStats {
  std::vector<IterationStats> iterations;  // last fl_* call only
  std::size_t max_buf1 = 0;
  std::size_t max_buf2 = 0;
  std::int64_t buf1_stores = 0;  // early next-iteration Phase-1 messages
  std::int64_t tdm_stores = 0;   // early slot messages parked in the slot buffer
  std::int64_t tdm_hits = 0;     // slots served from the slot buffer
  std::vector<std::int64_t> tdm_slots;  // slot value on each get1_meas return
};

/// One node's view of the distributed testbed.
///
/// Construction binds the listener; start() runs the address-book
/// handshake with the master (node 0); the three algorithms then run
/// against user callbacks. All members are meant to be called from one
/// driver; overlapping calls throw Error(Busy).
class Testbed {
 public:
  Testbed(int no_nodes, int node_id, int fl_srv_id, std::string master_ip, NetBackend& backend,
          TestbedOptions opts = {});
  ~Testbed();

  Testbed(const Testbed&) = delete;
  Testbed& operator=(const Testbed&) = delete;

  /// Master: collect n-1 init triples, broadcast the sorted book.
  /// Others: register with the master and wait for the book.
  void start();

  FlData fl_centralized(const ServerCallback& sfun, const ClientCallback& cfun, FlData ldata,
                        const FlData& pdata, int no_iters = 1);

  FlData fl_decentralized(const ServerCallback& sfun, const ClientCallback& cfun, FlData ldata,
                          const FlData& pdata, int no_iters = 1);

  /// TDM exchange for the current slot. Passing absent odata skips the slot.
  FlData get1_meas(int peer_id, const FlData& odata);

  /// Stops the listener and closes the inbox. Idempotent.
  void shutdown();

  int no_nodes() const { return no_nodes_; }
  int node_id() const { return node_id_; }
  int fl_srv_id() const { return fl_srv_id_; }
  const NodeAddress& self() const { return self_; }
  const std::vector<NodeAddress>& book() const { return book_; }
  std::int64_t tdm_slot() const { return tdm_slot_; }
  const TestbedStats& stats() const { return stats_; }
  Inbox& inbox() { return server_.inbox(); }

 private:
  class BusyGuard;

  Envelope next_envelope();
  void require_started(const char* op) const;
  void send(const Endpoint& dest, const Envelope& env);
  std::vector<Endpoint> others() const;
  void reply_dec(const DecMsg& msg, std::int64_t iter, const ClientCallback& cfun, const FlData& ldata,
                 const FlData& pdata, IterationStats& it);

  int no_nodes_;
  int node_id_;
  int fl_srv_id_;
  std::string master_ip_;
  NetBackend& backend_;
  TestbedOptions opts_;
  NodeAddress self_;
  Server server_;
  std::vector<NodeAddress> book_;
  bool started_ = false;
  bool shut_down_ = false;
  std::atomic<bool> busy_{false};

  // Envelopes that arrived while waiting for the address book.
  std::deque<Envelope> pending_;

  std::deque<DecMsg> buf1_;
  std::vector<FlData> buf2_;

  std::int64_t tdm_slot_ = 0;
  std::map<std::int64_t, TdmMsg> tdm_buf_;

  TestbedStats stats_;
};

}  // namespace flamesh
