#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "bridge/dependency.hpp"
#include "oracles.hpp"

using namespace bridge;

namespace {

Command c(std::int64_t ts, Op op, const std::string& tag) {
  Command out;
  out.ts = ts;
  out.op = op;
  out.tag = tag;
  return out;
}

ProcessControlOperation op_of(std::vector<Command> cmds, std::string event = "e") {
  return {std::move(event), std::move(cmds)};
}

std::map<oracle::Pair, std::vector<std::pair<std::int64_t, std::int64_t>>> as_map(
    const std::vector<RbwDependency>& deps) {
  std::map<oracle::Pair, std::vector<std::pair<std::int64_t, std::int64_t>>> out;
  for (const auto& d : deps) out[{d.src, d.dst}] = d.occurrences;
  return out;
}

}  // namespace

TEST(ExtractRbw, ReadThenWrite) {
  const auto deps = extract_rbw(op_of({c(10, Op::read, "A"), c(17, Op::write, "B")}));
  ASSERT_EQ(deps.size(), 1u);
  EXPECT_EQ(deps[0].src, "A");
  EXPECT_EQ(deps[0].dst, "B");
  ASSERT_EQ(deps[0].occurrences.size(), 1u);
  EXPECT_EQ(deps[0].occurrences[0], std::make_pair(std::int64_t{10}, std::int64_t{17}));
}

TEST(ExtractRbw, WriteWithoutReadEmitsNothing) {
  EXPECT_TRUE(extract_rbw(op_of({c(5, Op::write, "B")})).empty());
}

TEST(ExtractRbw, LastReadWinsForEveryWrite) {
  const auto deps = as_map(extract_rbw(op_of(
      {c(1, Op::read, "A"), c(2, Op::read, "C"), c(3, Op::write, "B"), c(4, Op::write, "D")})));
  ASSERT_EQ(deps.size(), 2u);
  EXPECT_TRUE(deps.count({"C", "B"}));
  EXPECT_TRUE(deps.count({"C", "D"}));
}

TEST(ExtractRbw, ReadInSameScanCycleDoesNotGovern) {
  const auto deps = as_map(
      extract_rbw(op_of({c(1, Op::read, "A"), c(5, Op::read, "C"), c(5, Op::write, "B")})));
  ASSERT_EQ(deps.size(), 1u);
  EXPECT_TRUE(deps.count({"A", "B"}));
}

TEST(ExtractRbw, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    auto cmds = oracle::random_trace(rng, 200, false);
    const auto op = op_of(cmds);
    EXPECT_EQ(as_map(extract_rbw(op)), oracle::rbw(cmds)) << "trial " << trial;
    for (const auto& d : extract_rbw(op)) {
      for (const auto& [r, w] : d.occurrences) EXPECT_LT(r, w);
    }
  }
}

TEST(ControlTime, UsesPriorWriteOnSource) {
  const auto op = op_of({c(100, Op::write, "Valve.0"), c(150, Op::read, "Valve.0"),
                         c(170, Op::write, "Valve.2")});
  const auto s = control_time_samples(extract_rbw(op), op);
  ASSERT_EQ(s.at({"Valve.0", "Valve.2"}), std::vector<double>{70.0});
}

TEST(ControlTime, FallsBackToGoverningRead) {
  const auto op = op_of({c(10, Op::read, "L"), c(25, Op::write, "V")});
  EXPECT_EQ(control_time_samples(extract_rbw(op), op).at({"L", "V"}), std::vector<double>{15.0});
}

TEST(ControlTime, RepeatedEqualIntervals) {
  const auto op = op_of({c(0, Op::write, "A"), c(10, Op::read, "A"), c(70, Op::write, "B"),
                         c(100, Op::write, "A"), c(110, Op::read, "A"), c(170, Op::write, "B")});
  EXPECT_EQ(control_time_samples(extract_rbw(op), op).at({"A", "B"}),
            (std::vector<double>{70.0, 70.0}));
}

TEST(ControlTime, MatchesOracleAndIsNonNegative) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cmds = oracle::random_trace(rng, 200, false);
    const auto op = op_of(cmds);
    const auto got = control_time_samples(extract_rbw(op), op);
    EXPECT_EQ(got, oracle::intervals(cmds)) << "trial " << trial;
    for (const auto& [k, v] : got) {
      for (double x : v) EXPECT_GE(x, 0.0);
    }
  }
}

TEST(Bursts, MaximalRuns) {
  const auto b = burst_sizes(op_of({c(0, Op::write, "A"), c(1, Op::write, "A"),
                                    c(2, Op::write, "B"), c(3, Op::write, "A")}));
  EXPECT_EQ(b.at("A"), (std::vector<int>{2, 1}));
  EXPECT_EQ(b.at("B"), (std::vector<int>{1}));
}

TEST(Bursts, NoWritesGivesEmptyMap) {
  EXPECT_TRUE(burst_sizes(op_of({c(0, Op::read, "A")})).empty());
}

TEST(Bursts, ReadEndsBurst) {
  const auto b = burst_sizes(
      op_of({c(0, Op::write, "A"), c(1, Op::read, "X"), c(2, Op::write, "A")}));
  EXPECT_EQ(b.at("A"), (std::vector<int>{1, 1}));
}

TEST(Bursts, MatchOracleAndPartitionWrites) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cmds = oracle::random_trace(rng, 200, false);
    const auto op = op_of(cmds);
    const auto b = burst_sizes(op);
    EXPECT_EQ(b, oracle::bursts(cmds));
    const auto f = control_frequency(op);
    for (const auto& [tag, sizes] : b) {
      EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), 0), f.at(tag).count);
      for (int s : sizes) EXPECT_GE(s, 1);
    }
  }
}

TEST(Frequency, CountsWritesOverAllCommands) {
  std::vector<Command> cmds;
  for (int k = 0; k < 18; ++k) cmds.push_back(c(k, Op::write, "P.0"));
  for (int k = 0; k < 6; ++k) cmds.push_back(c(100 + k, Op::read, "L"));
  const auto f = control_frequency(op_of(cmds));
  EXPECT_EQ(f.at("P.0"), (FrequencyCount{18, 24}));
}

TEST(Frequency, SingleReadHasNoEntries) {
  EXPECT_TRUE(control_frequency(op_of({c(0, Op::read, "A")})).empty());
}

TEST(Frequency, MixedWrites) {
  const auto f = control_frequency(op_of({c(0, Op::read, "X"), c(1, Op::write, "A"),
                                          c(2, Op::write, "B"), c(3, Op::write, "A")}));
  EXPECT_EQ(f.at("A"), (FrequencyCount{2, 4}));
  EXPECT_EQ(f.at("B"), (FrequencyCount{1, 4}));
}

TEST(Frequency, SumBoundedByLengthWithEqualityIffNoReads) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const auto cmds = oracle::random_trace(rng, 200, false);
    if (cmds.empty()) continue;
    const auto f = control_frequency(op_of(cmds));
    int sum = 0;
    for (const auto& [tag, fc] : f) sum += fc.count;
    const bool has_read =
        std::any_of(cmds.begin(), cmds.end(), [](const Command& x) { return x.op == Op::read; });
    EXPECT_LE(sum, static_cast<int>(cmds.size()));
    EXPECT_EQ(sum == static_cast<int>(cmds.size()), !has_read);
  }
}

TEST(Features, DeterministicForIdenticalInput) {
  std::mt19937_64 a(3), b(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto op1 = op_of(oracle::random_trace(a, 200, false));
    const auto op2 = op_of(oracle::random_trace(b, 200, false));
    EXPECT_EQ(extract_features(op1), extract_features(op2));
  }
}

TEST(Graph, OneDependency) {
  const auto g = build_graph({op_of({c(0, Op::read, "A"), c(1, Op::write, "B")})});
  EXPECT_EQ(g.node_count(), 2u);
  EXPECT_EQ(g.edge_count(), 1u);
}

TEST(Graph, SameDependencyAcrossOperationsMerges) {
  const auto op = op_of({c(0, Op::read, "A"), c(1, Op::write, "B")});
  const auto g = build_graph({op, op});
  ASSERT_EQ(g.edge_count(), 1u);
  const auto& e = g.edges.at({"A", "B"});
  EXPECT_EQ(e.occurrences, 2u);
  EXPECT_EQ(e.intervals.size(), 2u);
}

TEST(Graph, EveryEdgeBackedByOccurrence) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto op = op_of(oracle::random_trace(rng, 200, false));
    const auto g = build_graph({op});
    for (const auto& [k, e] : g.edges) {
      EXPECT_GE(e.occurrences, 1u);
      EXPECT_EQ(e.intervals.size(), e.occurrences);
    }
  }
}

TEST(Graph, ExportsJsonAndDot) {
  const auto g = build_graph({op_of({c(0, Op::read, "A"), c(1, Op::write, "B")})});
  EXPECT_NE(graph_to_json(g).find("\"A\""), std::string::npos);
  EXPECT_NE(graph_to_dot(g).find("\"A\" -> \"B\""), std::string::npos);
}
