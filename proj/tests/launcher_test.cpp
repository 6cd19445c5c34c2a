#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "flamesh/error.hpp"
#include "flamesh/launcher.hpp"
#include "json.hpp"
#include "support.hpp"

namespace flamesh {
namespace {

using namespace std::chrono_literals;
using launcher::IdSpecifier;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kNodeError;
}

std::string run_capture(const std::string& cmd, int* status) {
  std::string out;
  FILE* p = ::popen(cmd.c_str(), "r");
  char buf[512];
  while (p && std::fgets(buf, sizeof buf, p)) out += buf;
  int rc = p ? ::pclose(p) : -1;
  *status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return out;
}

TEST(IdSpec, Parse) {
  EXPECT_EQ(launcher::parse_spec("id", 4), IdSpecifier::everyone());
  EXPECT_EQ(launcher::parse_spec("1-3", 4), IdSpecifier::range(1, 3));
  EXPECT_EQ(launcher::parse_spec("2-2", 4), IdSpecifier::range(2, 2));
  EXPECT_EQ(launcher::resolve(IdSpecifier::everyone(), 3), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(launcher::resolve(IdSpecifier::range(1, 2), 3), (std::vector<int>{1, 2}));
  EXPECT_EQ(launcher::format_spec(IdSpecifier::range(0, 1)), "0-1");
  EXPECT_EQ(launcher::format_spec(IdSpecifier::everyone()), "id");
}

TEST(IdSpec, Errors) {
  EXPECT_EQ(code_of([] { launcher::parse_spec("ids", 3); }), ErrorCode::kBadSpecifier);
  EXPECT_EQ(code_of([] { launcher::parse_spec("1", 3); }), ErrorCode::kBadSpecifier);
  EXPECT_EQ(code_of([] { launcher::parse_spec("a-b", 3); }), ErrorCode::kBadSpecifier);
  EXPECT_EQ(code_of([] { launcher::parse_spec("-1-2", 3); }), ErrorCode::kBadSpecifier);
  EXPECT_EQ(code_of([] { launcher::parse_spec("0-3", 3); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([] { launcher::parse_spec("2-1", 3); }), ErrorCode::kOutOfRange);
}

TEST(LaunchPlan, ArgvShape) {
  auto plan = launcher::LaunchPlan::make("example4", 4, IdSpecifier::everyone(), {"1", "3", "127.0.0.1"});
  EXPECT_EQ(plan.ids, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(plan.argv_for(2), (std::vector<std::string>{"example4", "4", "2", "1", "3", "127.0.0.1"}));
}

TEST(LaunchPlan, Invalid) {
  EXPECT_EQ(code_of([] { launcher::LaunchPlan::make("", 3, IdSpecifier::everyone(), {}); }),
            ErrorCode::kInvalidPlan);
  launcher::LaunchPlan bad{"example2", 2, {0, 5}, {}};
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::kInvalidPlan);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(launcher::exit_code_for(ErrorCode::kTimeout), launcher::kExitTimeout);
  EXPECT_EQ(launcher::exit_code_for(ErrorCode::kUnreachable), launcher::kExitUnreachable);
  EXPECT_EQ(launcher::exit_code_for(ErrorCode::kProtocolSkew), launcher::kExitProtocol);
  EXPECT_EQ(launcher::exit_code_for(ErrorCode::kInvalidArgs), launcher::kExitUsage);
  EXPECT_EQ(launcher::exit_code_for(ErrorCode::kBindFailure), launcher::kExitFailure);
}

TEST(FindResult, LastResultLineWins) {
  test::TempDir dir("findresult");
  auto log = dir.path() / "node0.log";
  std::ofstream(log) << "noise\nRESULT nodeId=0 value=1.0\nRESULT nodeId=0 value=[2.0]\n";
  EXPECT_EQ(launcher::find_result(log), "[2.0]");
  EXPECT_EQ(launcher::find_result(dir.path() / "missing.log"), std::nullopt);
}

TEST(Launch, Example2OverLoopback) {
  test::TempDir dir("launch-ex2");
  auto opts = test::node_launch_options(dir.path());
  auto plan = launcher::LaunchPlan::make("example2_cent_avg", 3, IdSpecifier::everyone(), {"0", test::loopback(41)});
  auto report = launcher::launch(plan, opts);
  ASSERT_TRUE(report.all_ok()) << report.nodes[0].to_json();
  EXPECT_NO_THROW(report.check());
  EXPECT_EQ(report.node(0)->result, "[1.75]");
  EXPECT_EQ(report.node(1)->result, "[1.74951171875]");
  EXPECT_EQ(report.node(2)->result, "[1.75048828125]");
  auto j = nlohmann::json::parse(report.node(0)->to_json());
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["exit"], 0);
  EXPECT_EQ(j["result"], "[1.75]");
}

TEST(Launch, SplitAcrossTwoLaunches) {
  // Two terminals, one launching node 0 and the other nodes 1-2.
  test::TempDir dir("launch-split");
  auto opts = test::node_launch_options(dir.path() / "a");
  auto opts2 = test::node_launch_options(dir.path() / "b");
  std::optional<launcher::LaunchReport> peers;
  std::thread t([&] {
    peers = launcher::launch(
        launcher::LaunchPlan::make("example3", 3, IdSpecifier::range(1, 2), {test::loopback(42)}), opts2);
  });
  auto master = launcher::launch(launcher::LaunchPlan::make("example3", 3, IdSpecifier::range(0, 0),
                                                            {test::loopback(42)}),
                                 opts);
  t.join();
  ASSERT_TRUE(master.all_ok());
  ASSERT_TRUE(peers && peers->all_ok());
  EXPECT_EQ(master.node(0)->result, "[1.984375]");
  EXPECT_EQ(peers->node(1)->result, "[2.0]");
  EXPECT_EQ(peers->node(2)->result, "[2.015625]");
}

TEST(Launch, DeadMasterExitsUnreachable) {
  test::TempDir dir("launch-dead");
  auto opts = test::node_launch_options(dir.path());
  opts.env["FLAMESH_CONNECT_ATTEMPTS"] = "2";
  auto report = launcher::launch(
      launcher::LaunchPlan::make("example2", 3, IdSpecifier::range(1, 2), {"0", test::loopback(43)}), opts);
  EXPECT_FALSE(report.all_ok());
  for (const auto& n : report.nodes) {
    EXPECT_EQ(n.exit_code, launcher::kExitUnreachable);
    EXPECT_EQ(n.status, "unreachable");
  }
  EXPECT_EQ(code_of([&] { report.check(); }), ErrorCode::kNonzeroExit);
}

TEST(Launch, MissingPeersExitTimeout) {
  test::TempDir dir("launch-timeout");
  auto opts = test::node_launch_options(dir.path());
  opts.env["FLAMESH_RECV_TIMEOUT_MS"] = "300";
  auto report = launcher::launch(
      launcher::LaunchPlan::make("example2", 3, IdSpecifier::range(0, 0), {"0", test::loopback(44)}), opts);
  ASSERT_EQ(report.nodes.size(), 1u);
  EXPECT_EQ(report.nodes[0].exit_code, launcher::kExitTimeout);
  EXPECT_EQ(report.nodes[0].status, "timeout");
}

TEST(Launch, DeadlineKillsStragglers) {
  test::TempDir dir("launch-deadline");
  auto opts = test::node_launch_options(dir.path());
  opts.env["FLAMESH_RECV_TIMEOUT_MS"] = "0";
  opts.deadline = 300ms;
  auto report = launcher::launch(
      launcher::LaunchPlan::make("example2", 3, IdSpecifier::range(0, 0), {"0", test::loopback(45)}), opts);
  EXPECT_EQ(report.nodes[0].status, "killed");
  EXPECT_FALSE(report.all_ok());
}

TEST(Launch, UsageErrorFromNode) {
  test::TempDir dir("launch-usage");
  auto opts = test::node_launch_options(dir.path());
  auto report = launcher::launch(launcher::LaunchPlan::make("example2", 2, IdSpecifier::everyone(), {}), opts);
  for (const auto& n : report.nodes) EXPECT_EQ(n.exit_code, launcher::kExitUsage);
}

TEST(Launch, ExternalExecutable) {
  test::TempDir dir("launch-external");
  auto opts = test::node_launch_options(dir.path());
  auto report = launcher::launch(launcher::LaunchPlan::make("true", 2, IdSpecifier::everyone(), {}), opts);
  EXPECT_TRUE(report.all_ok());
  EXPECT_EQ(code_of([&] {
              launcher::launch(launcher::LaunchPlan::make("no-such-program-xyz", 1, IdSpecifier::everyone(), {}),
                               opts);
            }),
            ErrorCode::kSpawnFailure);
}

TEST(Cli, SimPrintsResults) {
  int status = 0;
  auto out = run_capture(std::string(FLAMESH_CLI_BIN) + " sim example3 3 10.0.0.1 --seed 4 --delay-max 500", &status);
  EXPECT_EQ(status, 0);
  EXPECT_EQ(out,
            "RESULT nodeId=0 value=[1.984375]\n"
            "RESULT nodeId=1 value=[2.0]\n"
            "RESULT nodeId=2 value=[2.015625]\n");
}

TEST(Cli, Schedule) {
  int status = 0;
  auto out = run_capture(std::string(FLAMESH_CLI_BIN) + " schedule 4 3", &status);
  EXPECT_EQ(status, 0);
  EXPECT_EQ(out, "slot 0: 0<->3 1<->2\nslot 1: 0<->1 2<->3\nslot 2: 0<->3 1<->2\n");
}

TEST(Cli, LaunchReportsJsonLines) {
  test::TempDir dir("cli-launch");
  int status = 0;
  auto out = run_capture("FLAMESH_LOG_DIR=" + dir.path().string() + " FLAMESH_NODE_BIN=" + FLAMESH_NODE_BIN + " " +
                             FLAMESH_CLI_BIN + " launch example4 4 id 1 3 " + test::loopback(46),
                         &status);
  EXPECT_EQ(status, 0) << out;
  std::vector<std::string> results;
  std::stringstream ss(out);
  std::string line;
  while (std::getline(ss, line)) results.push_back(nlohmann::json::parse(line)["result"]);
  EXPECT_EQ(results, (std::vector<std::string>{"3.125", "2.375", "2.625", "1.875"}));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "node3.log"));
}

TEST(Cli, BadSpecifierIsUsageError) {
  int status = 0;
  run_capture(std::string(FLAMESH_CLI_BIN) + " launch example2 3 9-9 0 127.0.0.1 2>/dev/null", &status);
  EXPECT_EQ(status, 2);
}

}  // namespace
}  // namespace flamesh
