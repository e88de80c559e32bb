// mose: command-line front end for graphs, states, oracle checks and training runs.
//
// Exit codes: 0 success, 1 verification failure, 2 config or input error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mose/dgp.hpp"
#include "mose/experiment.hpp"
#include "mose/generator.hpp"
#include "mose/graph_io.hpp"
#include "mose/oracle.hpp"
#include "mose/state.hpp"

namespace fs = std::filesystem;
using namespace mose;

namespace {

constexpr int kOk = 0, kVerifyFailed = 1, kConfigError = 2;

fs::path output_root() {
  const char* env = std::getenv("MOSE_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::vector<fs::path> graph_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".json" && name.rfind("graph_", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::invalid_argument("no graph_*.json files in " + dir.string());
  return out;
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void print_states(const StateSequence& s) {
  for (int t = 0; t <= s.horizon(); ++t)
    std::cout << "S_" << t << " = " << to_string(s.states[t]) << "   C_" << t << " = " << to_string(s.closures[t])
              << "\n";
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  GraphGenParams p;
  int n = 100;
  std::uint64_t seed = 0;
  fs::path out;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.n < 1) throw std::invalid_argument("--n must be >= 1");
  if (a.p.density < 0.0 || a.p.density > 1.0) throw std::invalid_argument("--density must lie in [0, 1]");
  const fs::path out = a.out.empty() ? output_root() / "graphs" : a.out;
  fs::create_directories(out);
  int bad = 0;
  for (int k = 0; k < a.n; ++k) {
    const auto g = generate_random_graph(a.p, cell_seeds(a.seed, k, 0).graph);
    const auto problems = validate(g);
    for (const auto& msg : problems) std::cerr << "graph " << k << ": " << msg << "\n";
    bad += !problems.empty();
    char name[32];
    std::snprintf(name, sizeof name, "graph_%04d.json", k);
    save_graph(g, out / name);
  }
  std::cout << "wrote " << a.n << " graphs (m=" << a.p.vars_per_step << ", T=" << a.p.horizon << ", W=" << a.p.order
            << ", density=" << a.p.density << ") to " << out.string() << "\n";
  if (bad) {
    std::cerr << bad << " graphs failed validation\n";
    return kVerifyFailed;
  }
  return kOk;
}

// ---------------------------------------------------------------- construct / validate

int cmd_construct(const fs::path& graph, const fs::path& out, bool window) {
  const auto g = load_graph(graph);
  const auto s = window ? full_window_states(g) : construct_minimal_states(g);
  print_states(s);
  std::cout << "mean |S_t| = " << fmt(mean_state_size(s)) << "\n";
  if (!out.empty()) write_text_file(out, dump_canonical(state_sequence_to_json(s)));
  return kOk;
}

int cmd_validate(const fs::path& graph, const fs::path& states, bool window, bool json) {
  const auto g = load_graph(graph);
  StateSequence s;
  if (!states.empty())
    s = with_closures(g, state_sequence_from_json(read_json_file(states)).states);
  else
    s = window ? full_window_states(g) : construct_minimal_states(g);
  const auto report = check_validity(g, s);
  const auto markov = markov_violation(g, s);
  if (json) {
    auto j = validity_report_to_json(report);
    j["markov_dsep"] = markov ? Json{{"passed", false}, {"t", *markov}} : Json{{"passed", true}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << format_validity_table(report);
    std::cout << "graph-level Markov (d-separation): " << (markov ? "FAIL at t=" + std::to_string(*markov) : "pass")
              << "\n";
  }
  return report.all_passed() && !markov ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  fs::path dir;
  std::vector<fs::path> graphs;
  int scm_seeds = 3;
  double p = 0.5;
};

bool small_enough(const FullTimeGraph& g) {
  return g.vars_per_step() <= 3 && g.horizon() <= 4 && g.order() <= 2;
}

int cmd_verify(const VerifyArgs& a) {
  auto files = a.graphs;
  if (!a.dir.empty()) {
    const auto more = graph_files(a.dir);
    files.insert(files.end(), more.begin(), more.end());
  }
  if (files.empty()) throw std::invalid_argument("give --graph-dir or --graph");
  if (!(a.p > 0.0 && a.p < 1.0)) throw std::invalid_argument("--p must lie in (0, 1)");
  const double expected_gap = 1.0 - std::max(a.p, 1.0 - a.p);
  int failed = 0;
  for (const auto& file : files) {
    const auto g = load_graph(file);
    std::vector<std::string> problems;
    const auto minimal = construct_minimal_states(g);
    const auto window = full_window_states(g);
    for (const auto& [label, s] : {std::pair{"minimal", &minimal}, std::pair{"window", &window}}) {
      const auto r = check_validity(g, *s);
      for (auto c : kAllConditions)
        if (!r[c].passed) problems.push_back(std::string(label) + " " + condition_name(c) + ": " + r[c].detail);
      if (const auto t = markov_violation(g, *s)) problems.push_back(std::string(label) + " Markov d-sep fails at t=" +
                                                                     std::to_string(*t));
    }
    std::string extra;
    if (small_enough(g)) {
      double worst = 0.0;
      int mismatches = 0;
      for (int k = 0; k < a.scm_seeds; ++k) {
        const auto scm = random_tabular_scm(g, 2, static_cast<std::uint64_t>(k));
        const auto cmp = compare_q(scm, exact_q(scm, minimal), exact_q(scm, window));
        worst = std::max(worst, cmp.max_abs_diff);
        mismatches += cmp.argmax_mismatches;
      }
      if (worst > 1e-9 || mismatches) problems.push_back("exact DP: max |dQ| " + fmt(worst, 12) + ", " +
                                                         std::to_string(mismatches) + " argmax mismatches");
      int gaps = 0;
      for (const auto& d : single_point_deletions(g, a.p)) {
        if (d.gap) {
          ++gaps;
          if (std::abs(*d.gap - expected_gap) > 1e-12)
            problems.push_back("deleting " + to_string(d.node) + " from S_" + std::to_string(d.t) + ": gap " +
                               fmt(*d.gap, 12));
        } else if (!d.invalid) {
          problems.push_back("deleting " + to_string(d.node) + " from S_" + std::to_string(d.t) +
                             " stays valid with no lemma instance");
        }
      }
      extra = "  dp max|dQ|=" + fmt(worst, 12) + "  lemma gaps=" + std::to_string(gaps) + " (each " +
              fmt(expected_gap, 6) + ")";
    }
    std::cout << (problems.empty() ? "PASS " : "FAIL ") << file.filename().string() << extra << "\n";
    for (const auto& msg : problems) std::cout << "    " << msg << "\n";
    failed += !problems.empty();
  }
  std::cout << files.size() - failed << "/" << files.size() << " graphs verified\n";
  return failed ? kVerifyFailed : kOk;
}

// ---------------------------------------------------------------- oracle

int cmd_oracle(const fs::path& graph, std::uint64_t scm_seed, double p, const fs::path& dump) {
  const auto g = load_graph(graph);
  const auto scm = random_tabular_scm(g, 2, scm_seed);
  if (!dump.empty()) write_text_file(dump, dump_canonical(tabular_scm_to_json(scm)));
  const auto minimal = construct_minimal_states(g);
  const auto reference = exact_q(scm, full_window_states(g));
  std::cout << "representation      max|dQ| vs full window   argmax diff   Markov max dev   V*_0\n";
  auto row = [&](const std::string& label, const StateSequence& s) {
    const auto q = exact_q(scm, s);
    const auto cmp = compare_q(scm, q, reference);
    const auto mk = test_markov(scm, s);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-19s %22.3e %13d %16.3e %8.5f\n", label.c_str(), cmp.max_abs_diff,
                  cmp.argmax_mismatches, mk.max_deviation, q.value(0));
    std::cout << buf;
  };
  row("minimal", minimal);
  for (int w = 0; w <= g.order(); ++w) row("window(" + std::to_string(w) + ")", window_states(g, w));
  std::cout << "\nsingle-point deletions (lemma instances at p=" << p << ")\n";
  for (const auto& d : single_point_deletions(g, p))
    std::cout << "  S_" << d.t << " minus " << to_string(d.node) << ": " << (d.invalid ? "invalid" : "VALID")
              << (d.gap ? ", value gap " + fmt(*d.gap, 12) : ", carried only") << "\n";
  return kOk;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const fs::path& graph, const std::string& family, std::uint64_t spec_seed, int episodes,
                 std::uint64_t seed, const std::string& policy, const fs::path& out, const fs::path& spec_out) {
  const auto g = load_graph(graph);
  const auto spec = sample_spec(g, family_from_name(family), spec_seed);
  if (policy != "random" && policy != "zero") throw std::invalid_argument("--policy must be random or zero");
  if (!spec_out.empty()) write_text_file(spec_out, spec_to_json(spec).dump(2) + "\n");
  Environment env(spec);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, spec.action_arity - 1);
  std::vector<Trajectory> eps;
  for (int e = 0; e < episodes; ++e) {
    env.reset(episode_seed(seed, e));
    while (!env.done()) env.step(policy == "zero" ? 0 : pick(rng));
    Trajectory tr;
    const int m = env.vars_per_step();
    for (std::size_t k = 0; k < env.history().size(); k += m)
      tr.obs.emplace_back(env.history().begin() + k, env.history().begin() + k + m);
    tr.actions = env.actions();
    tr.rewards = env.rewards();
    eps.push_back(std::move(tr));
  }
  const auto csv = trajectories_to_csv(eps);
  if (out.empty())
    std::cout << csv;
  else
    write_text_file(out, csv);
  return kOk;
}

// ---------------------------------------------------------------- train / report

void print_summary(const Summary& s, const std::map<std::string, double>& seconds) {
  std::cout << "method               cells   final mean   95% CI                 overall mean   wall s\n";
  for (const auto& [name, m] : s.methods) {
    char buf[200];
    const auto it = seconds.find(name);
    std::snprintf(buf, sizeof buf, "%-20s %5zu %12.4f   [%9.4f, %9.4f] %14.4f %8.1f\n", name.c_str(), m.cells,
                  m.final_mean, m.final_ci_low, m.final_ci_high, m.overall_mean,
                  it == seconds.end() ? 0.0 : it->second);
    std::cout << buf;
  }
}

int cmd_train(const ExperimentConfig& c) {
  std::cout << "training " << c.methods.size() << " methods x " << c.instances << " instances x " << c.repetitions
            << " repetitions, " << c.episodes << " episodes each -> " << c.output.string() << "\n";
  const auto rec = run_experiment(c, true, [](const CellResult& r) {
    std::cerr << "  " << r.method << " i" << r.instance << " r" << r.repetition << ": "
              << (r.error.empty() ? fmt(r.seconds, 1) + " s" : "FAILED " + r.error) << "\n";
  });
  print_summary(rec.summary, rec.method_seconds);
  if (rec.failed_cells()) {
    std::cerr << rec.failed_cells() << " cells failed; see summary.json\n";
    return kVerifyFailed;
  }
  return kOk;
}

int cmd_report(const fs::path& run) {
  const auto summary_json = read_json_file(run / "summary.json");
  std::ifstream in(run / "rewards.csv");
  if (!in) throw std::invalid_argument("cannot read " + (run / "rewards.csv").string());
  const long final_window = summary_json.at("final_window").get<long>();
  const int smoothing = summary_json.at("smoothing").get<int>();
  const auto s = summarize(read_reward_csv(in), final_window, smoothing);
  print_summary(s, summary_json.value("method_seconds", std::map<std::string, double>{}));

  // the emitted summary must be recomputable from the raw rows
  double worst = 0.0;
  bool shape_ok = summary_json.at("methods").size() == s.methods.size() &&
                  summary_json.at("cells").size() == s.cell_final.size();
  for (const auto& [name, m] : s.methods) {
    if (!summary_json.at("methods").contains(name)) {
      shape_ok = false;
      continue;
    }
    const auto& j = summary_json.at("methods").at(name);
    worst = std::max({worst, std::abs(j.at("final_mean").get<double>() - m.final_mean),
                      std::abs(j.at("overall_mean").get<double>() - m.overall_mean),
                      std::abs(j.at("final_ci95")[0].get<double>() - m.final_ci_low),
                      std::abs(j.at("final_ci95")[1].get<double>() - m.final_ci_high)});
  }
  for (const auto& cell : summary_json.at("cells")) {
    const CellKey key{cell.at("method"), cell.at("instance"), cell.at("repetition")};
    const auto it = s.cell_final.find(key);
    if (it == s.cell_final.end()) {
      shape_ok = false;
      continue;
    }
    worst = std::max(worst, std::abs(cell.at("final_mean").get<double>() - it->second));
  }
  std::ifstream curves(run / "curves.csv");
  std::string line;
  if (curves && std::getline(curves, line)) {
    while (std::getline(curves, line)) {
      std::stringstream ss(line);
      std::string name, ep, mean, smooth;
      std::getline(ss, name, ',');
      std::getline(ss, ep, ',');
      std::getline(ss, mean, ',');
      std::getline(ss, smooth, ',');
      const auto it = s.methods.find(name);
      const auto e = std::stoul(ep);
      if (it == s.methods.end() || e >= it->second.curve.size()) {
        shape_ok = false;
        continue;
      }
      worst = std::max({worst, std::abs(std::stod(mean) - it->second.curve[e]),
                        std::abs(std::stod(smooth) - it->second.smoothed[e])});
    }
  }
  const bool ok = shape_ok && worst <= 1e-12;
  std::cout << "recomputed from rewards.csv: max deviation " << worst << (ok ? " (ok)" : " (MISMATCH)") << "\n";
  return ok ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- table1

struct Table1Args {
  fs::path dir;
  bool live = false;
  bool calibrate = false;
  int m = 10, T = 24, n = 100;
  std::vector<int> Ws{2, 5, 10};
  double density = 0.165;
  double band_lo = 16.77, band_hi = 16.90;
  std::uint64_t seed = 0;
  fs::path json;
};

int cmd_table1(const Table1Args& a) {
  std::vector<Table1Row> rows;
  Json meta;
  if (!a.live) {
    if (a.dir.empty()) throw std::invalid_argument("give --graph-dir or --live");
    std::map<int, std::vector<double>> means;
    std::map<int, double> density;
    for (const auto& f : graph_files(a.dir)) {
      const auto g = load_graph(f);
      means[g.order()].push_back(mean_state_size(construct_minimal_states(g)));
    }
    for (const auto& [W, v] : means) {
      if (v.size() < 2) throw std::invalid_argument("W=" + std::to_string(W) + " has fewer than 2 graphs");
      rows.push_back({W, std::nan(""), size_stats_from_means(v)});
    }
    meta["graph_dir"] = a.dir.string();
  } else {
    double density = a.density;
    if (a.calibrate) {
      const auto cal = calibrate_density({a.m, a.T, 2, 0.0}, a.n, a.seed, a.band_lo, a.band_hi);
      density = cal.density;
      meta["calibration"] = {{"W", 2}, {"band", {a.band_lo, a.band_hi}}, {"iterations", cal.iterations},
                             {"hit", cal.hit}, {"density", cal.density}};
      std::cout << "calibrated density " << density << " after " << cal.iterations << " probes"
                << (cal.hit ? "" : " (band not reached)") << "\n";
    }
    for (int W : a.Ws) rows.push_back(table1_row({a.m, a.T, W, density}, a.n, a.seed));
    meta["m"] = a.m;
    meta["T"] = a.T;
    meta["graphs_per_W"] = a.n;
    meta["seed"] = a.seed;
  }
  std::cout << "W    density   nodes per state   95% CI              graphs\n";
  Json jrows = Json::array();
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-4d %-9s %15.3f   [%7.3f, %7.3f] %8zu\n", r.W,
                  std::isnan(r.density) ? "-" : fmt(r.density, 5).c_str(), r.stats.mean, r.stats.ci95_low,
                  r.stats.ci95_high, r.stats.samples);
    std::cout << buf;
    jrows.push_back({{"W", r.W},
                     {"density", std::isnan(r.density) ? Json(nullptr) : Json(r.density)},
                     {"mean", r.stats.mean},
                     {"ci95", {r.stats.ci95_low, r.stats.ci95_high}},
                     {"graphs", r.stats.samples}});
  }
  if (!a.json.empty()) {
    meta["rows"] = jrows;
    meta["ci"] = "normal approximation over per-graph means";
    write_text_file(a.json, meta.dump(2) + "\n");
  }
  return kOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal Markovian states, exact oracles and MOSE training on synthetic full time graphs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write random full time graphs as JSON");
  generate->add_option("--m", gen.p.vars_per_step, "observations per step")->capture_default_str();
  generate->add_option("--T", gen.p.horizon, "last time index")->capture_default_str();
  generate->add_option("--W", gen.p.order, "process order (largest lag)")->capture_default_str();
  generate->add_option("--density", gen.p.density, "edge inclusion probability")->capture_default_str();
  generate->add_option("--n", gen.n, "number of graphs")->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--out", gen.out, "output directory (default $MOSE_OUTPUT_ROOT/graphs)");

  fs::path graph, out, states;
  bool window = false, json = false;
  auto* construct = app.add_subcommand("construct", "backward state construction on one graph");
  construct->add_option("--graph", graph)->required()->check(CLI::ExistingFile);
  construct->add_option("--out", out, "write the state sequence JSON here");
  construct->add_flag("--window", window, "stack the full window instead");

  auto* validate = app.add_subcommand("validate", "check the four validity conditions and the Markov d-separation");
  validate->add_option("--graph", graph)->required()->check(CLI::ExistingFile);
  validate->add_option("--states", states, "state sequence JSON (default: constructed states)")
      ->check(CLI::ExistingFile);
  validate->add_flag("--window", window, "validate the full-window stack");
  validate->add_flag("--json", json, "print the report as JSON");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "validity, Markov, exact-DP and minimality suites");
  verify->add_option("--graph-dir", ver.dir)->check(CLI::ExistingDirectory);
  verify->add_option("--graph", ver.graphs)->check(CLI::ExistingFile);
  verify->add_option("--scm-seeds", ver.scm_seeds, "random tabular models per small graph")->capture_default_str();
  verify->add_option("--p", ver.p, "lemma instance probability")->capture_default_str();

  std::uint64_t scm_seed = 0;
  double p = 0.5;
  fs::path dump;
  auto* oracle = app.add_subcommand("oracle", "exact Q and Markov deviation table for a small graph");
  oracle->add_option("--graph", graph)->required()->check(CLI::ExistingFile);
  oracle->add_option("--scm-seed", scm_seed)->capture_default_str();
  oracle->add_option("--p", p, "lemma instance probability")->capture_default_str();
  oracle->add_option("--dump-scm", dump, "write the tabular model JSON here");

  std::string family = "linear", policy = "random";
  std::uint64_t spec_seed = 0, seed = 0;
  int episodes = 1;
  fs::path spec_out;
  auto* simulate = app.add_subcommand("simulate", "roll out an environment and print trajectories as CSV");
  simulate->add_option("--graph", graph)->required()->check(CLI::ExistingFile);
  simulate->add_option("--family", family, "linear, tanh or sincos")->capture_default_str();
  simulate->add_option("--spec-seed", spec_seed)->capture_default_str();
  simulate->add_option("--episodes", episodes)->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed)->capture_default_str();
  simulate->add_option("--policy", policy, "random or zero")->capture_default_str();
  simulate->add_option("--out", out, "CSV path (default stdout)");
  simulate->add_option("--spec-out", spec_out, "write the sampled model JSON here");

  ExperimentConfig cfg;
  fs::path config_file;
  std::string methods;
  bool no_parity = false;
  auto* train = app.add_subcommand("train", "run a training campaign");
  train->add_option("--config", config_file, "JSON config; flags override it")->check(CLI::ExistingFile);
  std::vector<CLI::Option*> overrides;
  overrides.push_back(train->add_option("--family", cfg.family));
  overrides.push_back(train->add_option("--m", cfg.m));
  overrides.push_back(train->add_option("--T", cfg.T));
  overrides.push_back(train->add_option("--W", cfg.W));
  overrides.push_back(train->add_option("--density", cfg.density));
  overrides.push_back(train->add_option("--w", cfg.w, "MOSE order (default W-1)"));
  auto* methods_opt = train->add_option("--methods", methods, "comma list, e.g. mose,window(0),window(full),dag");
  overrides.push_back(train->add_option("--episodes", cfg.episodes));
  overrides.push_back(train->add_option("--instances", cfg.instances));
  overrides.push_back(train->add_option("--repetitions", cfg.repetitions));
  overrides.push_back(train->add_option("--seed", cfg.seed));
  auto* out_opt = train->add_option("--out", cfg.output, "run directory (default $MOSE_OUTPUT_ROOT/train)");
  auto* parity_opt = train->add_flag("--no-grad-parity", no_parity, "baselines take one update per batch");
  overrides.push_back(train->add_option("--threads", cfg.threads));
  overrides.push_back(train->add_flag("--checkpoints", cfg.save_checkpoints, "save online nets per cell"));
  overrides.push_back(train->add_option("--smoothing", cfg.smoothing));
  overrides.push_back(train->add_option("--final-window", cfg.final_window));
  overrides.push_back(train->add_option("--epsilon-fraction", cfg.agent.eps_fraction));
  overrides.push_back(train->add_option("--epsilon-end", cfg.agent.eps_end));

  Table1Args t1;
  std::string ws = "2,5,10";
  auto* table1 = app.add_subcommand("table1", "nodes-per-state statistics per W");
  table1->add_option("--graph-dir", t1.dir)->check(CLI::ExistingDirectory);
  table1->add_flag("--live", t1.live, "generate graphs in memory instead of reading a directory");
  table1->add_flag("--calibrate", t1.calibrate, "bisect the density on W=2 first (live mode)");
  table1->add_option("--m", t1.m)->capture_default_str();
  table1->add_option("--T", t1.T)->capture_default_str();
  table1->add_option("--Ws", ws, "comma list of W (live mode)")->capture_default_str();
  table1->add_option("--n", t1.n, "graphs per W (live mode)")->capture_default_str();
  table1->add_option("--density", t1.density)->capture_default_str();
  table1->add_option("--band-lo", t1.band_lo)->capture_default_str();
  table1->add_option("--band-hi", t1.band_hi)->capture_default_str();
  table1->add_option("--seed", t1.seed)->capture_default_str();
  table1->add_option("--json", t1.json, "write the rows as JSON");

  fs::path run;
  auto* report = app.add_subcommand("report", "summarize a run directory and recheck it against rewards.csv");
  report->add_option("--run", run)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*construct) return cmd_construct(graph, out, window);
    if (*validate) return cmd_validate(graph, states, window, json);
    if (*verify) return cmd_verify(ver);
    if (*oracle) return cmd_oracle(graph, scm_seed, p, dump);
    if (*simulate) return cmd_simulate(graph, family, spec_seed, episodes, seed, policy, out, spec_out);
    if (*train) {
      ExperimentConfig c;
      if (!config_file.empty()) c = config_from_json(read_json_file(config_file));
      // flags given on the command line win over the file
      const ExperimentConfig flags = cfg;
      for (auto* o : overrides) {
        if (!o->count()) continue;
        const auto name = o->get_name();
        if (name == "--family") c.family = flags.family;
        else if (name == "--m") c.m = flags.m;
        else if (name == "--T") c.T = flags.T;
        else if (name == "--W") c.W = flags.W;
        else if (name == "--density") c.density = flags.density;
        else if (name == "--w") c.w = flags.w;
        else if (name == "--episodes") c.episodes = flags.episodes;
        else if (name == "--instances") c.instances = flags.instances;
        else if (name == "--repetitions") c.repetitions = flags.repetitions;
        else if (name == "--seed") c.seed = flags.seed;
        else if (name == "--threads") c.threads = flags.threads;
        else if (name == "--checkpoints") c.save_checkpoints = flags.save_checkpoints;
        else if (name == "--smoothing") c.smoothing = flags.smoothing;
        else if (name == "--final-window") c.final_window = flags.final_window;
        else if (name == "--epsilon-fraction") c.agent.eps_fraction = flags.agent.eps_fraction;
        else if (name == "--epsilon-end") c.agent.eps_end = flags.agent.eps_end;
      }
      if (methods_opt->count()) c.methods = split_list(methods);
      if (parity_opt->count()) c.matched_grad_steps = false;
      if (out_opt->count())
        c.output = flags.output;
      else if (config_file.empty() || !read_json_file(config_file).contains("output"))
        c.output = output_root() / "train";
      check_config(c);
      return cmd_train(c);
    }
    if (*table1) {
      t1.Ws.clear();
      for (const auto& w : split_list(ws)) t1.Ws.push_back(std::stoi(w));
      return cmd_table1(t1);
    }
    if (*report) return cmd_report(run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
