#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mose/graph_io.hpp"

namespace mose {

enum class DgpFamily { LinearAnm, TanhPnl, SinCosPnl };

std::string family_name(DgpFamily f);  // "linear", "tanh", "sincos"
DgpFamily family_from_name(const std::string& s);

/// Structural equations bound to a graph. Observation X_t^i uses bias[i];
/// every reward uses reward_bias. Weights are keyed by graph edge, including
/// the action edges A_{t-1} -> X_t^i and A_t -> R_t.
struct DgpSpec {
  FullTimeGraph graph;
  DgpFamily family = DgpFamily::LinearAnm;
  std::vector<double> bias;
  double reward_bias = 0.0;
  std::map<Edge, double> weights;
  double scale = 1.0;        // c in the nonlinear families
  double noise_scale = 1.0;  // 0 pins the noise
  int action_arity = 2;
  std::uint64_t seed = 0;
};

/// b ~ Normal(0, 1), weights ~ Uniform[-1, 1], one draw per graph edge.
DgpSpec sample_spec(const FullTimeGraph& g, DgpFamily family, std::uint64_t seed, double scale = 1.0);

/// Throws std::domain_error when the weight keys differ from the graph edges
/// or the bias vector has the wrong length.
void check_spec(const DgpSpec& spec);

/// Value of one observation or reward node given the values of every node
/// (dense graph order; actions hold their numeric code) and its noise draw.
double evaluate_node(const DgpSpec& spec, const NodeId& v, const std::vector<double>& values, double noise);

inline constexpr double kNoiseHalfWidth = 1.7320508075688772;  // sqrt(3)

struct StepResult {
  double reward = 0.0;
  std::vector<double> next;  // X_{t+1}, empty after the last step
  bool done = false;
};

/// Episodic environment. One instance serves one consumer.
class Environment {
 public:
  explicit Environment(DgpSpec spec);

  const DgpSpec& spec() const { return spec_; }
  int horizon() const { return spec_.graph.horizon(); }
  int vars_per_step() const { return spec_.graph.vars_per_step(); }

  /// Draws X_0; absent parents contribute 0.
  const std::vector<double>& reset(std::uint64_t episode_seed);
  /// Applies A_t = a: returns R_t and, for t < T, X_{t+1}. Throws
  /// std::domain_error once the episode is over or before reset.
  StepResult step(int a);

  int t() const { return t_; }
  bool done() const { return done_; }
  /// X_0 .. X_t, flattened with m entries per step.
  const std::vector<double>& history() const { return history_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<int>& actions() const { return actions_; }

 private:
  struct Term {
    int dense;
    double weight;
    bool action;
  };
  double eval(int dense_node, double noise) const;
  double draw_noise();

  DgpSpec spec_;
  std::vector<std::vector<Term>> terms_;  // per dense node
  std::vector<double> bias_of_;           // per dense node
  std::vector<char> is_reward_;
  std::vector<double> values_;
  std::vector<double> history_, rewards_;
  std::vector<int> actions_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> noise_{-kNoiseHalfWidth, kNoiseHalfWidth};
  int t_ = -1;
  bool done_ = true;
};

Json spec_to_json(const DgpSpec& spec);
DgpSpec spec_from_json(const Json& j);

/// One episode for offline inspection.
struct Trajectory {
  std::vector<std::vector<double>> obs;  // T + 1 rows of m values
  std::vector<int> actions;              // T + 1
  std::vector<double> rewards;           // T + 1
};

/// Header "episode,t,x0..x{m-1},a,r", one row per step.
std::string trajectories_to_csv(const std::vector<Trajectory>& episodes);

}  // namespace mose
