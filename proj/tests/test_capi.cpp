// Exercises the shared library through its C header only.
#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "bridge/bridge.h"

namespace fs = std::filesystem;

namespace {

const std::string kFixtures = BRIDGE_FIXTURES;

std::string take(char* text) {
  std::string out = text != nullptr ? text : "";
  bridge_string_free(text);
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string::npos ? text.size() : nl;
    if (end > pos) out.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

bool has(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

class CApi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("bridge_capi_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
    bridge_sim* train = nullptr;
    ASSERT_EQ(bridge_simulate(nullptr, nullptr, 11, &train), BRIDGE_OK);
    ASSERT_EQ(bridge_sim_write(train, path("train.jsonl"), path("train.csv"), nullptr), BRIDGE_OK);
    bridge_sim_free(train);
    bridge_sim* live = nullptr;
    const auto attack = kFixtures + "/attacks/oldsmar.json";
    ASSERT_EQ(bridge_simulate(nullptr, attack.c_str(), 7, &live), BRIDGE_OK);
    ASSERT_EQ(bridge_sim_write(live, path("live.jsonl"), path("live.csv"), path("labels.json")),
              BRIDGE_OK);
    bridge_sim_free(live);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static const char* path(const std::string& name) {
    static std::vector<std::string> keep;
    keep.push_back((dir_ / name).string());
    return keep.back().c_str();
  }

  static bridge_constraints* learn() {
    const char* traces[] = {path("train.jsonl")};
    bridge_constraints* m = nullptr;
    EXPECT_EQ(bridge_constraints_learn(traces, 1, 1, &m), BRIDGE_OK);
    return m;
  }

  static fs::path dir_;
};
fs::path CApi::dir_;

}  // namespace

TEST(CApiBasics, StatusNamesAndVersion) {
  EXPECT_STREQ(bridge_status_name(BRIDGE_OK), "ok");
  EXPECT_STREQ(bridge_status_name(BRIDGE_E_ORDERING), "ordering");
  EXPECT_STREQ(bridge_status_name(BRIDGE_E_INSUFFICIENT_DATA), "insufficient_data");
  EXPECT_STREQ(bridge_status_name(static_cast<bridge_status>(1234)), "unknown");
  ASSERT_NE(bridge_version(), nullptr);
  EXPECT_GT(std::strlen(bridge_version()), 0u);
}

TEST(CApiBasics, NullArgumentsAreRejected) {
  EXPECT_EQ(bridge_simulate(nullptr, nullptr, 1, nullptr), BRIDGE_E_ARGUMENT);
  EXPECT_GT(std::strlen(bridge_last_error()), 0u);
  char* text = nullptr;
  EXPECT_EQ(bridge_extract(nullptr, BRIDGE_GRAPH_JSON, &text), BRIDGE_E_ARGUMENT);
  EXPECT_EQ(text, nullptr);
  bridge_string_free(nullptr);
  bridge_sim_free(nullptr);
  bridge_constraints_free(nullptr);
  bridge_monitor_free(nullptr);
  bridge_pinn_free(nullptr);
}

TEST(CApiBasics, ErrorsMapToStatusCodes) {
  char* text = nullptr;
  const auto bad = kFixtures + "/bad_trace.jsonl";
  EXPECT_EQ(bridge_extract(bad.c_str(), BRIDGE_GRAPH_JSON, &text), BRIDGE_E_PARSE);
  EXPECT_TRUE(has(bridge_last_error(), "2"));
  EXPECT_EQ(bridge_extract("/nonexistent/trace.jsonl", BRIDGE_GRAPH_JSON, &text), BRIDGE_E_IO);
  bridge_sim* sim = nullptr;
  const auto attack = kFixtures + "/dosing.json";  // a scenario is not an attack
  EXPECT_NE(bridge_simulate(nullptr, attack.c_str(), 1, &sim), BRIDGE_OK);
  EXPECT_EQ(sim, nullptr);
}

TEST_F(CApi, SimulationSummaryAndDeterminism) {
  bridge_sim* a = nullptr;
  bridge_sim* b = nullptr;
  ASSERT_EQ(bridge_simulate(nullptr, nullptr, 11, &a), BRIDGE_OK);
  ASSERT_EQ(bridge_simulate(nullptr, nullptr, 11, &b), BRIDGE_OK);
  char* sa = nullptr;
  char* sb = nullptr;
  ASSERT_EQ(bridge_sim_summary(a, &sa), BRIDGE_OK);
  ASSERT_EQ(bridge_sim_summary(b, &sb), BRIDGE_OK);
  EXPECT_EQ(take(sa), take(sb));
  bridge_sim_free(a);
  bridge_sim_free(b);
}

TEST_F(CApi, ExtractGraphFormats) {
  char* json = nullptr;
  char* dot = nullptr;
  ASSERT_EQ(bridge_extract(path("train.jsonl"), BRIDGE_GRAPH_JSON, &json), BRIDGE_OK);
  ASSERT_EQ(bridge_extract(path("train.jsonl"), BRIDGE_GRAPH_DOT, &dot), BRIDGE_OK);
  EXPECT_TRUE(has(take(json), "Valve.2"));
  EXPECT_TRUE(has(take(dot), "->"));
}

TEST_F(CApi, ConstraintsPersist) {
  bridge_constraints* m = learn();
  ASSERT_NE(m, nullptr);
  ASSERT_EQ(bridge_constraints_save(m, path("constraints.json")), BRIDGE_OK);
  bridge_constraints* back = nullptr;
  ASSERT_EQ(bridge_constraints_load(path("constraints.json"), &back), BRIDGE_OK);
  char* ja = nullptr;
  char* jb = nullptr;
  ASSERT_EQ(bridge_constraints_to_json(m, &ja), BRIDGE_OK);
  ASSERT_EQ(bridge_constraints_to_json(back, &jb), BRIDGE_OK);
  EXPECT_EQ(take(ja), take(jb));
  bridge_constraints_free(m);
  bridge_constraints_free(back);
  EXPECT_EQ(bridge_constraints_learn(nullptr, 0, 1, &m), BRIDGE_E_ARGUMENT);
}

TEST_F(CApi, StreamingMatchesBatchAndRejectsOutOfOrder) {
  bridge_constraints* m = learn();
  char* batch = nullptr;
  ASSERT_EQ(bridge_monitor_file(m, path("live.jsonl"), 1.0, BRIDGE_REFERENCE_STREAM, &batch), BRIDGE_OK);
  const auto batch_text = take(batch);
  EXPECT_TRUE(has(batch_text, "CONTROL_TIME"));

  bridge_monitor* mon = nullptr;
  ASSERT_EQ(bridge_monitor_new(m, 1.0, BRIDGE_REFERENCE_STREAM, &mon), BRIDGE_OK);
  std::ifstream in(path("live.jsonl"));
  std::string line, streamed, first_command;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    char* out = nullptr;
    ASSERT_EQ(bridge_monitor_push(mon, line.c_str(), &out), BRIDGE_OK) << line;
    streamed += take(out);
    if (first_command.empty() && !has(line, "scan_cycles_per_second")) first_command = line;
  }
  char* tail = nullptr;
  ASSERT_EQ(bridge_monitor_finish(mon, &tail), BRIDGE_OK);
  streamed += take(tail);
  std::vector<std::string> finals;
  for (const auto& l : lines(streamed)) {
    if (!has(l, "\"provisional\":true")) finals.push_back(l);
  }
  std::vector<std::string> batch_finals;
  for (const auto& l : lines(batch_text)) {
    if (!has(l, "\"provisional\":true")) batch_finals.push_back(l);
  }
  std::sort(finals.begin(), finals.end());
  std::sort(batch_finals.begin(), batch_finals.end());
  EXPECT_EQ(finals, batch_finals);

  char* out = nullptr;
  EXPECT_EQ(bridge_monitor_push(mon, first_command.c_str(), &out), BRIDGE_E_ORDERING);
  bridge_monitor_free(mon);

  EXPECT_EQ(bridge_monitor_new(m, 0.0, BRIDGE_REFERENCE_STREAM, &mon), BRIDGE_E_ARGUMENT);
  bridge_constraints_free(m);
}

TEST_F(CApi, PinnTrainScorePersist) {
  bridge_pinn_config cfg;
  bridge_pinn_config_default(&cfg);
  EXPECT_EQ(cfg.seq_len, 5);
  EXPECT_DOUBLE_EQ(cfg.gamma, 0.003);
  cfg.epochs = 2;
  bridge_pinn* p = nullptr;
  ASSERT_EQ(bridge_pinn_train(path("train.csv"), &cfg, &p), BRIDGE_OK) << bridge_last_error();
  double theta = -1.0;
  ASSERT_EQ(bridge_pinn_theta(p, &theta), BRIDGE_OK);
  EXPECT_GT(theta, 0.0);
  char* hist = nullptr;
  ASSERT_EQ(bridge_pinn_history(p, &hist), BRIDGE_OK);
  EXPECT_EQ(take(hist).front(), '[');
  ASSERT_EQ(bridge_pinn_save(p, path("pinn.json")), BRIDGE_OK);
  bridge_pinn* back = nullptr;
  ASSERT_EQ(bridge_pinn_load(path("pinn.json"), &back), BRIDGE_OK);
  char* wa = nullptr;
  char* wb = nullptr;
  ASSERT_EQ(bridge_pinn_score(p, path("live.csv"), &wa, nullptr), BRIDGE_OK);
  ASSERT_EQ(bridge_pinn_score(back, path("live.csv"), &wb, nullptr), BRIDGE_OK);
  const auto windows = take(wa);
  EXPECT_EQ(windows, take(wb));
  EXPECT_FALSE(lines(windows).empty());
  bridge_pinn_free(p);
  bridge_pinn_free(back);

  cfg.seq_len = 1000;
  EXPECT_NE(bridge_pinn_train(path("train.csv"), &cfg, &p), BRIDGE_OK);
}

TEST_F(CApi, DeriveItbFromSimulation) {
  char* profile = nullptr;
  ASSERT_EQ(bridge_derive_itb(path("train.jsonl"), path("train.csv"), 0.05, &profile), BRIDGE_OK);
  EXPECT_TRUE(has(take(profile), "\"itb\": 5"));
}

TEST(CApiFixtures, CorrelateAndReport) {
  const auto dir = kFixtures + "/oldsmar/";
  const auto alerts = dir + "alerts.jsonl", windows = dir + "windows.jsonl",
             profile = dir + "profile.json", series = dir + "series.csv";
  char* verdicts = nullptr;
  ASSERT_EQ(bridge_correlate(alerts.c_str(), windows.c_str(), profile.c_str(), series.c_str(), 6,
                             0.01, 1000.0, &verdicts),
            BRIDGE_OK);
  const auto text = take(verdicts);
  EXPECT_TRUE(has(text, "CONFIRMED"));
  const auto out = (fs::temp_directory_path() / "bridge_capi_verdicts.jsonl").string();
  std::ofstream(out) << text;
  char* md = nullptr;
  ASSERT_EQ(bridge_report(out.c_str(), &md), BRIDGE_OK);
  EXPECT_TRUE(has(take(md), "Valve.2"));
  fs::remove(out);
  EXPECT_EQ(bridge_correlate(alerts.c_str(), windows.c_str(), profile.c_str(), series.c_str(), 0,
                             0.01, 1000.0, &verdicts),
            BRIDGE_E_ARGUMENT);
}
