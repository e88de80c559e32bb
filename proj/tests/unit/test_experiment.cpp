#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mose/experiment.hpp"

using namespace mose;

namespace {

ExperimentConfig tiny(const std::string& out) {
  ExperimentConfig c;
  c.m = 3;
  c.T = 3;
  c.W = 2;
  c.density = 0.3;
  c.episodes = 40;
  c.instances = 2;
  c.repetitions = 2;
  c.methods = {"mose", "window(0)", "causal-mose"};
  c.output = std::filesystem::temp_directory_path() / out;
  c.agent.hidden = 8;
  c.agent.batch = 8;
  c.final_window = 10;
  c.smoothing = 5;
  return c;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(method_name(parse_method("mose", 3, 2, 3)) == "mose(2)");
  CHECK(method_name(parse_method("mose(0)", 3, 2, 3)) == "mose(0)");
  CHECK(method_name(parse_method("causal-mose", 3, 1, 2)) == "causal-mose(1)");
  const auto full = parse_method("window(full)", 5, 4, 5);
  CHECK(full.mode == FeatureMode::window(4));
  CHECK(full.grad_steps == 5);
  CHECK(parse_method("dag", 2, 1, 2).mode == FeatureMode::dag());
  CHECK(method_name(parse_method("reward-parents", 2, 1, 1)) == "reward-parents");
  CHECK_THROWS_AS(parse_method("window", 2, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(parse_method("window(2)", 2, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(parse_method("frames", 2, 1, 1), std::invalid_argument);
}

TEST_CASE("config checks and JSON") {
  ExperimentConfig c;
  CHECK_NOTHROW(check_config(c));
  CHECK(c.mose_order() == 1);
  CHECK(c.baseline_grad_steps() == 2);
  CHECK(c.m == 10);
  CHECK(c.T == 24);
  CHECK(c.instances == 17);
  CHECK(c.repetitions == 2);
  CHECK(c.episodes == 10000);
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  auto bad = c;
  bad.methods = {"mose", "mose(1)"};
  CHECK_THROWS_AS(check_config(bad), std::invalid_argument);
  bad = c;
  bad.family = "cubic";
  CHECK_THROWS_AS(check_config(bad), std::invalid_argument);
  bad = c;
  bad.w = 2;
  CHECK_THROWS_AS(check_config(bad), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(Json{{"episodez", 3}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(Json{{"episodes", "many"}}), std::invalid_argument);
}

TEST_CASE("seeds") {
  const auto a = cell_seeds(7, 1, 0), b = cell_seeds(7, 1, 1), c = cell_seeds(7, 2, 0);
  CHECK(a.graph == b.graph);
  CHECK(a.spec == b.spec);
  CHECK(a.agent != b.agent);
  CHECK(a.graph != c.graph);
  CHECK(episode_seed(a.agent, 0) != episode_seed(a.agent, 1));
  CHECK(cell_seeds(7, 1, 0).agent == a.agent);
}

TEST_CASE("summary arithmetic") {
  RewardTable t;
  t[{"m", 0, 0}] = {1.0, 2.0, 3.0, 4.0};
  t[{"m", 1, 0}] = {3.0, 2.0, 1.0, 0.0};
  const auto s = summarize(t, 2, 2);
  const auto& m = s.methods.at("m");
  CHECK(m.cells == 2);
  CHECK(m.curve == std::vector<double>{2.0, 2.0, 2.0, 2.0});
  CHECK(s.cell_final.at({"m", 0, 0}) == 3.5);
  CHECK(s.cell_final.at({"m", 1, 0}) == 0.5);
  CHECK(m.final_mean == 2.0);
  CHECK(m.smoothed[0] == 2.0);
  CHECK(summary_distance(s, s) == 0.0);
  t.erase({"m", 1, 0});
  CHECK(summary_distance(s, summarize(t, 2, 2)) == std::numeric_limits<double>::infinity());
}

TEST_CASE("runner writes recomputable, reproducible output") {
  auto c = tiny("mose_runner_test");
  std::filesystem::remove_all(c.output);
  const auto rec = run_experiment(c);
  CHECK(rec.failed_cells() == 0);
  CHECK(rec.cells.size() == 12);
  for (const char* f : {"config.json", "rewards.csv", "summary.json", "curves.csv"})
    CHECK(std::filesystem::exists(c.output / f));

  std::ifstream in(c.output / "rewards.csv");
  const auto table = read_reward_csv(in);
  CHECK(table.size() == 12);
  CHECK(summary_distance(summarize(table, c.final_window, c.smoothing), rec.summary) <= 1e-12);

  // one cell rerun in isolation matches the campaign bit for bit
  const auto& cell = rec.cells[4];
  const auto methods = c.resolved_methods();
  const auto it = std::find_if(methods.begin(), methods.end(), [&](const auto& m) { return method_name(m) == cell.method; });
  REQUIRE(it != methods.end());
  const auto again = run_cell(c, *it, cell.instance, cell.repetition);
  CHECK(again.rewards == cell.rewards);
  CHECK(table.at({cell.method, cell.instance, cell.repetition}) == cell.rewards);

  auto threaded = c;
  threaded.threads = 3;
  const auto rec2 = run_experiment(threaded, false);
  CHECK(summary_distance(rec2.summary, rec.summary) == 0.0);
  std::filesystem::remove_all(c.output);
}

TEST_CASE("a failing cell reports instead of throwing") {
  const auto c = tiny("unused");
  MethodSpec bad;
  bad.kind = MethodKind::Mose;
  bad.w = 5;  // beyond w_max, which the parser would refuse
  const auto r = run_cell(c, bad, 0, 0);
  CHECK(r.error.find("w_max") != std::string::npos);
  CHECK(r.rewards.empty());
}

TEST_CASE("nodes-per-state helpers") {
  const auto a = table1_row({5, 6, 2, 0.0}, 3, 1);
  CHECK(a.stats.mean == 0.0);
  const auto lo = table1_row({5, 6, 2, 0.1}, 10, 1), hi = table1_row({5, 6, 2, 0.4}, 10, 1);
  CHECK(lo.stats.mean < hi.stats.mean);
  const auto cal = calibrate_density({5, 6, 2, 0.0}, 10, 1, hi.stats.mean - 0.2, hi.stats.mean + 0.2);
  CHECK(cal.hit);
  CHECK(cal.row.stats.mean >= hi.stats.mean - 0.2);
  CHECK(cal.row.stats.mean <= hi.stats.mean + 0.2);
}
