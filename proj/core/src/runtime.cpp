#include "flamesh/runtime.hpp"

#include <algorithm>
#include <set>

#include "flamesh/error.hpp"

namespace flamesh {
namespace {

NodeAddress checked_self(int no_nodes, int node_id, int fl_srv_id, const std::string& master_ip,
                         const TestbedOptions& opts) {
  if (no_nodes < 1) throw Error(ErrorCode::kInvalidArgs, "noNodes must be >= 1");
  if (node_id < 0 || node_id >= no_nodes)
    throw Error(ErrorCode::kInvalidArgs, "nodeId " + std::to_string(node_id) + " not in [0, " +
                                             std::to_string(no_nodes - 1) + "]");
  if (fl_srv_id < 0 || fl_srv_id >= no_nodes)
    throw Error(ErrorCode::kInvalidArgs, "flSrvId " + std::to_string(fl_srv_id) + " out of range");
  if (master_ip.empty()) throw Error(ErrorCode::kInvalidArgs, "master IP is empty");
  return NodeAddress::make(node_id, opts.self_ip.empty() ? master_ip : opts.self_ip);
}

[[noreturn]] void skew(const std::string& what) { throw Error(ErrorCode::kProtocolSkew, what); }

}  // namespace

class Testbed::BusyGuard {
 public:
  explicit BusyGuard(std::atomic<bool>& flag) : flag_(flag) {
    if (flag_.exchange(true)) throw Error(ErrorCode::kBusy, "concurrent call on one testbed");
  }
  ~BusyGuard() { flag_.store(false); }
  BusyGuard(const BusyGuard&) = delete;
  BusyGuard& operator=(const BusyGuard&) = delete;

 private:
  std::atomic<bool>& flag_;
};

Testbed::Testbed(int no_nodes, int node_id, int fl_srv_id, std::string master_ip, NetBackend& backend,
                 TestbedOptions opts)
    : no_nodes_(no_nodes),
      node_id_(node_id),
      fl_srv_id_(fl_srv_id),
      master_ip_(std::move(master_ip)),
      backend_(backend),
      opts_(std::move(opts)),
      self_(checked_self(no_nodes_, node_id_, fl_srv_id_, master_ip_, opts_)),
      server_(serve(self_.endpoint(), backend_)) {}

Testbed::~Testbed() { shutdown(); }

void Testbed::shutdown() {
  if (shut_down_) return;
  shut_down_ = true;
  server_.shutdown();
}

void Testbed::require_started(const char* op) const {
  if (!started_) throw Error(ErrorCode::kInvalidArgs, std::string(op) + " called before start()");
  if (shut_down_) throw Error(ErrorCode::kClosed, std::string(op) + " called after shutdown()");
}

void Testbed::send(const Endpoint& dest, const Envelope& env) { send_msg(dest, env, backend_, opts_.retry); }

std::vector<Endpoint> Testbed::others() const {
  std::vector<Endpoint> out;
  for (const auto& a : book_)
    if (a.node_id != node_id_) out.push_back(a.endpoint());
  return out;
}

Envelope Testbed::next_envelope() {
  if (!pending_.empty()) {
    Envelope env = std::move(pending_.front());
    pending_.pop_front();
    return env;
  }
  return rcv_msg(server_.inbox(), opts_.recv_timeout);
}

// ---------------------------------------------------------------------------
// Startup handshake

void Testbed::start() {
  BusyGuard guard(busy_);
  if (started_) throw Error(ErrorCode::kInvalidArgs, "start() called twice");
  if (shut_down_) throw Error(ErrorCode::kClosed, "start() called after shutdown()");

  if (no_nodes_ == 1) {
    book_ = {self_};
    started_ = true;
    return;
  }

  if (node_id_ == 0) {
    auto inits = rcv_msgs(server_.inbox(), static_cast<std::size_t>(no_nodes_ - 1), opts_.recv_timeout);
    std::set<int> seen;
    book_ = {self_};
    for (const auto& env : inits) {
      if (!env.is<InitMsg>()) skew("expected init during startup, got " + describe(env));
      const auto& sender = env.as<InitMsg>().sender;
      if (sender.node_id == 0 || !seen.insert(sender.node_id).second)
        throw Error(ErrorCode::kDuplicateNodeId, "node id " + std::to_string(sender.node_id) + " registered twice");
      if (sender.node_id >= no_nodes_)
        throw Error(ErrorCode::kInvalidArgs, "node id " + std::to_string(sender.node_id) + " out of range");
      book_.push_back(sender);
    }
    std::sort(book_.begin(), book_.end(),
              [](const NodeAddress& a, const NodeAddress& b) { return a.node_id < b.node_id; });
    broadcast_msg(others(), Envelope{BookMsg{book_}}, backend_, opts_.retry);
  } else {
    send(Endpoint{master_ip_, port_for(0)}, Envelope{InitMsg{self_}});
    for (;;) {
      auto env = rcv_msg(server_.inbox(), opts_.recv_timeout);
      if (!env.is<BookMsg>()) {
        // Peers that already have the book may talk to us first.
        pending_.push_back(std::move(env));
        continue;
      }
      auto book = env.as<BookMsg>().book;
      if (book.size() != static_cast<std::size_t>(no_nodes_))
        throw Error(ErrorCode::kMalformedPayload, "book has " + std::to_string(book.size()) + " entries, expected " +
                                                      std::to_string(no_nodes_));
      for (int i = 0; i < no_nodes_; ++i)
        if (book[static_cast<std::size_t>(i)].node_id != i)
          throw Error(ErrorCode::kMalformedPayload, "book is missing node " + std::to_string(i));
      if (!(book[static_cast<std::size_t>(node_id_)] == self_))
        throw Error(ErrorCode::kMalformedPayload, "book entry for this node does not match its address");
      book_ = std::move(book);
      break;
    }
  }
  started_ = true;
}

// ---------------------------------------------------------------------------
// Centralized

FlData Testbed::fl_centralized(const ServerCallback& sfun, const ClientCallback& cfun, FlData ldata,
                               const FlData& pdata, int no_iters) {
  BusyGuard guard(busy_);
  require_started("fl_centralized");
  if (no_iters < 0) throw Error(ErrorCode::kInvalidArgs, "noIters must be >= 0");
  stats_.iterations.assign(static_cast<std::size_t>(no_iters), {});

  const auto peers = others();
  const Endpoint server = book_[static_cast<std::size_t>(fl_srv_id_)].endpoint();
  for (int iter = 0; iter < no_iters; ++iter) {
    auto& it = stats_.iterations[static_cast<std::size_t>(iter)];
    if (node_id_ == fl_srv_id_) {
      broadcast_msg(peers, Envelope{CentMsg{ldata}}, backend_, opts_.retry);
      it.sent += static_cast<std::int64_t>(peers.size());
      std::vector<FlData> replies;
      replies.reserve(peers.size());
      while (replies.size() < peers.size()) {
        auto env = next_envelope();
        if (!env.is<CentMsg>())
          throw Error(ErrorCode::kMalformedPayload, "expected cent reply, got " + describe(env));
        replies.push_back(env.as<CentMsg>().data);
        ++it.processed;
      }
      ldata = sfun(pdata, replies);
    } else {
      auto env = next_envelope();
      if (!env.is<CentMsg>()) throw Error(ErrorCode::kMalformedPayload, "expected cent data, got " + describe(env));
      ++it.processed;
      ldata = cfun(ldata, pdata, env.as<CentMsg>().data);
      send(server, Envelope{CentMsg{ldata}});
      ++it.sent;
    }
  }
  return ldata;
}

// ---------------------------------------------------------------------------
// Decentralized

void Testbed::reply_dec(const DecMsg& msg, std::int64_t iter, const ClientCallback& cfun, const FlData& ldata,
                        const FlData& pdata, IterationStats& it) {
  FlData update = cfun(ldata, pdata, msg.data);
  send(msg.source, Envelope{DecMsg{iter, 2, self_.endpoint(), std::move(update)}});
  ++it.sent;
}

FlData Testbed::fl_decentralized(const ServerCallback& sfun, const ClientCallback& cfun, FlData ldata,
                                 const FlData& pdata, int no_iters) {
  BusyGuard guard(busy_);
  require_started("fl_decentralized");
  if (no_iters < 0) throw Error(ErrorCode::kInvalidArgs, "noIters must be >= 0");
  stats_.iterations.assign(static_cast<std::size_t>(no_iters), {});

  const auto peers = others();
  const auto expected = static_cast<std::int64_t>(2 * peers.size());
  for (std::int64_t iter = 0; iter < no_iters; ++iter) {
    auto& it = stats_.iterations[static_cast<std::size_t>(iter)];

    // Phase 1: act as a server.
    broadcast_msg(peers, Envelope{DecMsg{iter, 1, self_.endpoint(), ldata}}, backend_, opts_.retry);
    it.sent += static_cast<std::int64_t>(peers.size());

    // Phase 2: act as a client. ldata stays fixed for the whole phase.
    while (!buf1_.empty()) {
      DecMsg msg = std::move(buf1_.front());
      buf1_.pop_front();
      if (msg.iteration != iter) skew("buffered message from iteration " + std::to_string(msg.iteration));
      reply_dec(msg, iter, cfun, ldata, pdata, it);
      ++it.processed;
    }
    while (it.processed < expected) {
      auto env = next_envelope();
      if (!env.is<DecMsg>()) skew("expected dec message, got " + describe(env));
      auto msg = env.as<DecMsg>();
      if (msg.iteration == iter + 1 && msg.phase == 1) {
        buf1_.push_back(std::move(msg));
        ++stats_.buf1_stores;
        stats_.max_buf1 = std::max(stats_.max_buf1, buf1_.size());
        if (buf1_.size() > peers.size()) skew("more early Phase-1 messages than peers");
      } else if (msg.iteration == iter && msg.phase == 2) {
        buf2_.push_back(std::move(msg.data));
        stats_.max_buf2 = std::max(stats_.max_buf2, buf2_.size());
        ++it.processed;
      } else if (msg.iteration == iter && msg.phase == 1) {
        reply_dec(msg, iter, cfun, ldata, pdata, it);
        ++it.processed;
      } else {
        skew("dec message iter=" + std::to_string(msg.iteration) + " phase=" + std::to_string(msg.phase) +
             " during iteration " + std::to_string(iter));
      }
    }

    // Phase 3: aggregate the replies.
    ldata = sfun(pdata, buf2_);
    buf2_.clear();
  }
  return ldata;
}

// ---------------------------------------------------------------------------
// TDM exchange

FlData Testbed::get1_meas(int peer_id, const FlData& odata) {
  BusyGuard guard(busy_);
  require_started("get1_meas");

  if (odata.is_absent()) {
    stats_.tdm_slots.push_back(tdm_slot_);
    ++tdm_slot_;
    return FlData::absent();
  }
  if (peer_id < 0 || peer_id >= no_nodes_ || peer_id == node_id_)
    throw Error(ErrorCode::kInvalidArgs, "bad peer id " + std::to_string(peer_id));

  send(book_[static_cast<std::size_t>(peer_id)].endpoint(), Envelope{TdmMsg{tdm_slot_, node_id_, odata}});

  std::optional<TdmMsg> got;
  if (auto hit = tdm_buf_.find(tdm_slot_); hit != tdm_buf_.end()) {
    got = std::move(hit->second);
    tdm_buf_.erase(hit);
    ++stats_.tdm_hits;
  }
  while (!got) {
    auto env = next_envelope();
    if (!env.is<TdmMsg>()) skew("expected tdm message, got " + describe(env));
    auto msg = env.as<TdmMsg>();
    if (msg.slot == tdm_slot_) {
      got = std::move(msg);
      break;
    }
    if (msg.slot < tdm_slot_)
      skew("tdm message for past slot " + std::to_string(msg.slot) + " in slot " + std::to_string(tdm_slot_));
    if (tdm_buf_.count(msg.slot))
      throw Error(ErrorCode::kSlotReplay, "second message for slot " + std::to_string(msg.slot));
    tdm_buf_.emplace(msg.slot, std::move(msg));
    ++stats_.tdm_stores;
  }

  stats_.tdm_slots.push_back(tdm_slot_);
  ++tdm_slot_;
  return std::move(got->data);
}

}  // namespace flamesh
