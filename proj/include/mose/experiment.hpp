#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mose/agent.hpp"
#include "mose/generator.hpp"

namespace mose {

enum class MethodKind { Mose, CausalMose, Baseline };

struct MethodSpec {
  MethodKind kind = MethodKind::Baseline;
  int w = 0;                 // MOSE order
  FeatureMode mode;          // baselines
  int grad_steps = 1;        // baselines
};

/// Accepted names: "mose", "mose(w)", "causal-mose", "causal-mose(w)",
/// "window(l)", "window(full)" (= W-1), "dag", "reward-parents". An omitted
/// MOSE order means `default_w`. Throws std::invalid_argument.
MethodSpec parse_method(const std::string& name, int W, int default_w, int baseline_grad_steps);
/// Canonical name with every order spelled out, e.g. "mose(1)", "window(0)".
std::string method_name(const MethodSpec& m);

struct ExperimentConfig {
  std::string family = "linear";
  int m = 10;
  int T = 24;  // last step index, so T + 1 steps
  int W = 2;
  double density = 0.165;
  int w = -1;  // MOSE order, -1 means W - 1
  std::vector<std::string> methods{"mose", "window(0)", "window(full)", "dag", "reward-parents", "causal-mose"};
  long episodes = 10000;
  int instances = 17;
  int repetitions = 2;
  std::uint64_t seed = 0;
  std::filesystem::path output = "runs/default";
  bool matched_grad_steps = true;  // baselines get w + 1 updates per batch
  int threads = 1;
  bool save_checkpoints = false;
  int smoothing = 100;
  long final_window = 1000;
  AgentConfig agent;

  int mose_order() const { return w < 0 ? W - 1 : w; }
  int baseline_grad_steps() const { return matched_grad_steps ? mose_order() + 1 : 1; }
  std::vector<MethodSpec> resolved_methods() const;
};

/// Throws std::invalid_argument on an inconsistent config.
void check_config(const ExperimentConfig& c);
Json config_to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
ExperimentConfig config_from_json(const Json& j);

struct CellSeeds {
  std::uint64_t graph = 0, spec = 0, agent = 0;
};
CellSeeds cell_seeds(std::uint64_t base, int instance, int repetition);
std::uint64_t episode_seed(std::uint64_t agent_seed, long episode);

struct CellResult {
  std::string method;
  int instance = 0;
  int repetition = 0;
  CellSeeds seeds;
  std::vector<double> rewards;
  double seconds = 0.0;
  std::string error;  // empty on success
};

/// One (method, instance, repetition) training run. Never throws for a
/// failing run; the message lands in `error`.
CellResult run_cell(const ExperimentConfig& c, const MethodSpec& method, int instance, int repetition,
                    const std::filesystem::path& checkpoint = {});

using CellKey = std::tuple<std::string, int, int>;  // method, instance, repetition
using RewardTable = std::map<CellKey, std::vector<double>>;

struct MethodSummary {
  std::size_t cells = 0;
  double final_mean = 0.0;  // mean over cells of the trailing final_window mean
  double final_ci_low = 0.0, final_ci_high = 0.0;
  double overall_mean = 0.0;
  std::vector<double> curve;     // per-episode mean over cells
  std::vector<double> smoothed;  // trailing mean of curve
};

struct Summary {
  std::map<std::string, MethodSummary> methods;
  std::map<CellKey, double> cell_final;  // trailing final_window mean per cell
};

Summary summarize(const RewardTable& rows, long final_window, int smoothing);
Json summary_to_json(const Summary& s, long final_window, int smoothing);
/// Largest absolute difference over every numeric statistic; infinity when the
/// two summaries cover different methods or cells.
double summary_distance(const Summary& a, const Summary& b);

inline constexpr const char* kRewardCsvHeader =
    "method,instance,repetition,graph_seed,spec_seed,agent_seed,episode,reward";
void write_reward_rows(std::ostream& os, const CellResult& r);
RewardTable read_reward_csv(std::istream& is);

struct ExperimentRecord {
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::map<std::string, double> method_seconds;
  Summary summary;
  std::size_t failed_cells() const;
};

/// Runs every cell over `config.threads` workers and, unless `write` is
/// false, writes config.json, rewards.csv, summary.json and curves.csv under
/// config.output. `progress` is called from the writer side after each cell.
ExperimentRecord run_experiment(const ExperimentConfig& config, bool write = true,
                                const std::function<void(const CellResult&)>& progress = {});

// nodes-per-state table

struct Table1Row {
  int W = 0;
  double density = 0.0;
  SizeStats stats;
};

Table1Row table1_row(const GraphGenParams& p, int n_graphs, std::uint64_t seed);

struct Calibration {
  double density = 0.0;
  Table1Row row;
  int iterations = 0;
  bool hit = false;  // mean landed inside the target band
};

/// Bisection on density so the mean state size over `n_graphs` falls in
/// [lo, hi]; the same graph seeds are reused at every probe.
Calibration calibrate_density(GraphGenParams p, int n_graphs, std::uint64_t seed, double lo, double hi,
                              int max_iterations = 40);

}  // namespace mose
