#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include "flamesh/error.hpp"
#include "flamesh/simnet.hpp"
#include "flamesh/tcp_backend.hpp"
#include "flamesh/transport.hpp"
#include "support.hpp"

namespace flamesh {
namespace {

using namespace std::chrono_literals;
using test::loopback;

Envelope cent(double v) { return Envelope{CentMsg{FlData(v)}}; }

RetryPolicy quick_retry(int attempts) {
  RetryPolicy r;
  r.attempts = attempts;
  r.initial_delay = 10ms;
  return r;
}

TEST(RetryPolicy, DefaultSchedule) {
  RetryPolicy r;
  EXPECT_EQ(r.attempts, 20);
  EXPECT_EQ(r.delay_after(0), Duration(100ms));
  EXPECT_EQ(r.delay_after(1), Duration(150ms));
  EXPECT_EQ(r.delay_after(2), Duration(225ms));
  EXPECT_EQ(r.delay_after(30), Duration(5s));
  // Attempts 0..3 fail within 812.5 ms, so attempt 4 is the first after 1 s.
  Duration total{0};
  for (int k = 0; k < 4; ++k) total += r.delay_after(k);
  EXPECT_EQ(total, Duration(812500us));
  Duration budget{0};
  for (int k = 0; k < r.attempts - 1; ++k) budget += r.delay_after(k);
  EXPECT_EQ(r.budget(), budget);
}

TEST(ThreadInbox, FifoTimeoutAndClose) {
  ThreadInbox inbox;
  inbox.push(cent(1));
  inbox.push(cent(2));
  inbox.push(cent(3));
  EXPECT_EQ(rcv_msg(inbox), cent(1));
  EXPECT_EQ(rcv_msg(inbox), cent(2));
  EXPECT_EQ(rcv_msg(inbox), cent(3));
  auto t0 = std::chrono::steady_clock::now();
  try {
    rcv_msg(inbox, Duration(50ms));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 50ms);
  inbox.push(cent(4));
  inbox.close();
  EXPECT_EQ(rcv_msg(inbox), cent(4));
  try {
    rcv_msg(inbox, Duration(10ms));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClosed);
  }
}

TEST(ThreadInbox, CloseWakesBlockedConsumer) {
  ThreadInbox inbox;
  std::thread closer([&] {
    std::this_thread::sleep_for(50ms);
    inbox.close();
  });
  try {
    rcv_msg(inbox, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClosed);
  }
  closer.join();
}

TEST(RcvMsgs, TimeoutCarriesPartial) {
  ThreadInbox inbox;
  inbox.push(cent(1));
  inbox.push(cent(2));
  try {
    rcv_msgs(inbox, 3, Duration(30ms));
    FAIL();
  } catch (const RecvTimeout& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
    ASSERT_EQ(e.partial().size(), 2u);
    EXPECT_EQ(e.partial()[0], cent(1));
    EXPECT_EQ(e.partial()[1], cent(2));
  }
}

TEST(TcpTransport, ServeSendReceive) {
  TcpBackend backend;
  auto self = NodeAddress::make(1, loopback(21));
  auto server = serve(self.endpoint(), backend);
  send_msg(self.endpoint(), cent(20.83), backend);
  EXPECT_EQ(rcv_msg(server.inbox(), Duration(5s)), cent(20.83));
  server.shutdown();
  server.shutdown();
  try {
    rcv_msg(server.inbox(), Duration(1s));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClosed);
  }
}

TEST(TcpTransport, RebindAfterShutdown) {
  TcpBackend backend;
  Endpoint ep{loopback(22), port_for(0)};
  for (int i = 0; i < 3; ++i) {
    auto server = serve(ep, backend);
    send_msg(ep, cent(i), backend);
    EXPECT_EQ(rcv_msg(server.inbox(), Duration(5s)), cent(i));
    server.shutdown();
  }
}

TEST(TcpTransport, DoubleBindFails) {
  TcpBackend backend;
  Endpoint ep{loopback(23), port_for(0)};
  auto server = serve(ep, backend);
  try {
    auto second = serve(ep, backend);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBindFailure);
  }
}

TEST(TcpTransport, ConcurrentSendersAllArrive) {
  TcpBackend backend;
  Endpoint ep{loopback(24), port_for(0)};
  auto server = serve(ep, backend);
  std::vector<std::thread> senders;
  for (int s = 0; s < 4; ++s)
    senders.emplace_back([&, s] {
      TcpBackend mine;
      for (int k = 0; k < 25; ++k) send_msg(ep, cent(s * 100 + k), mine);
    });
  for (auto& t : senders) t.join();
  auto got = rcv_msgs(server.inbox(), 100, Duration(5s));
  std::vector<double> values;
  for (const auto& e : got) values.push_back(e.as<CentMsg>().data.scalar());
  std::sort(values.begin(), values.end());
  std::vector<double> expected;
  for (int s = 0; s < 4; ++s)
    for (int k = 0; k < 25; ++k) expected.push_back(s * 100 + k);
  EXPECT_EQ(values, expected);
}

TEST(TcpTransport, UnreachableAfterRetries) {
  TcpBackend backend;
  auto retry = quick_retry(3);
  auto t0 = std::chrono::steady_clock::now();
  try {
    send_msg(Endpoint{loopback(25), port_for(7)}, cent(1), backend, retry);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnreachable);
  }
  EXPECT_GE(std::chrono::steady_clock::now() - t0, retry.budget());
}

TEST(TcpTransport, LateServerReachedByRetry) {
  TcpBackend backend;
  Endpoint ep{loopback(26), port_for(1)};
  std::optional<Server> server;
  std::thread late([&] {
    std::this_thread::sleep_for(1s);
    server.emplace(serve(ep, backend));
  });
  auto t0 = std::chrono::steady_clock::now();
  send_msg(ep, cent(5), backend);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 1s);
  late.join();
  EXPECT_EQ(rcv_msg(server->inbox(), Duration(5s)), cent(5));
}

TEST(TcpTransport, BroadcastPartialFailure) {
  TcpBackend backend;
  Endpoint live{loopback(27), port_for(1)};
  Endpoint dead{loopback(27), port_for(2)};
  auto server = serve(live, backend);
  std::vector<Endpoint> dests = {dead, live};
  try {
    broadcast_msg(dests, cent(1), backend, quick_retry(2));
    FAIL();
  } catch (const PartialBroadcast& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPartialBroadcast);
    ASSERT_EQ(e.failed().size(), 1u);
    EXPECT_EQ(e.failed()[0], dead);
  }
  EXPECT_EQ(rcv_msg(server.inbox(), Duration(5s)), cent(1));
}

TEST(TcpTransport, TornAndGarbageFramesAreDropped) {
  TcpBackend backend;
  Endpoint ep{loopback(28), port_for(0)};
  auto server = serve(ep, backend);
  {
    // Prefix promises 100 bytes; the connection closes after 3.
    auto sink = backend.connect(ep);
    ASSERT_TRUE(sink);
    std::vector<std::uint8_t> torn = {0, 0, 0, 100, '[', '"', 'c'};
    sink->write(torn);
    sink->close();
  }
  {
    auto sink = backend.connect(ep);
    ASSERT_TRUE(sink);
    std::string body = R"(["nope",1])";
    std::vector<std::uint8_t> bad = {0, 0, 0, static_cast<std::uint8_t>(body.size())};
    bad.insert(bad.end(), body.begin(), body.end());
    sink->write(bad);
    sink->close();
  }
  send_msg(ep, cent(9), backend);
  EXPECT_EQ(rcv_msg(server.inbox(), Duration(5s)), cent(9));
  EXPECT_EQ(server.inbox().size(), 0u);
}

TEST(SimTransport, ZeroDelayPreservesSendOrder) {
  std::vector<Envelope> got;
  run_nodes({[&](const NodeEnv& env) {
              auto server = serve(Endpoint{env.ip, port_for(0)}, env.backend);
              got = rcv_msgs(server.inbox(), 2);
              return FlData();
            },
             [](const NodeEnv& env) {
               send_msg(Endpoint{sim_ip(0), port_for(0)}, cent(1), env.backend);
               send_msg(Endpoint{sim_ip(0), port_for(0)}, cent(2), env.backend);
               return FlData();
             }},
            SimConfig{1});
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], cent(1));
  EXPECT_EQ(got[1], cent(2));
}

TEST(SimTransport, BroadcastWithJitterReachesEveryPeer) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimConfig cfg{seed, 0ms, 500ms};
    std::vector<NodeMain> mains;
    mains.push_back([](const NodeEnv& env) {
      std::vector<Endpoint> dests;
      for (int i = 1; i < 4; ++i) dests.push_back({sim_ip(i), port_for(i)});
      env.backend.sleep_for(10ms);
      broadcast_msg(dests, cent(7), env.backend);
      return FlData();
    });
    for (int i = 1; i < 4; ++i)
      mains.push_back([](const NodeEnv& env) {
        auto server = serve(Endpoint{env.ip, port_for(env.node_id)}, env.backend);
        return rcv_msg(server.inbox()).as<CentMsg>().data;
      });
    auto results = run_nodes(mains, cfg);
    for (int i = 1; i < 4; ++i) EXPECT_EQ(results[static_cast<std::size_t>(i)], FlData(7.0)) << seed;
  }
}

TEST(SimTransport, RetryTimingUsesVirtualClock) {
  SimNet net;
  Duration failed_at{0};
  net.run({[&](const NodeEnv& env) {
    try {
      send_msg(Endpoint{sim_ip(5), port_for(5)}, cent(1), env.backend);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUnreachable);
      failed_at = net.now();
    }
    return FlData();
  }});
  EXPECT_EQ(failed_at, RetryPolicy{}.budget());
}

TEST(SimTransport, TimeoutCarriesPartialInVirtualTime) {
  SimNet net;
  std::size_t partial = 0;
  Duration at{0};
  net.run({[&](const NodeEnv& env) {
             auto server = serve(Endpoint{env.ip, port_for(0)}, env.backend);
             try {
               rcv_msgs(server.inbox(), 3, Duration(2s));
             } catch (const RecvTimeout& e) {
               partial = e.partial().size();
               at = net.now();
             }
             return FlData();
           },
           [](const NodeEnv& env) {
             send_msg(Endpoint{sim_ip(0), port_for(0)}, cent(1), env.backend);
             send_msg(Endpoint{sim_ip(0), port_for(0)}, cent(2), env.backend);
             return FlData();
           }});
  EXPECT_EQ(partial, 2u);
  EXPECT_EQ(at, Duration(2s));
}

}  // namespace
}  // namespace flamesh
