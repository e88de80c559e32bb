#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mose/dgp.hpp"
#include "mose/mlp.hpp"
#include "mose/state.hpp"

namespace mose {

using Net = Mlp<float>;

enum class FeatureKind { Window, DagState, RewardParents };

struct FeatureMode {
  FeatureKind kind = FeatureKind::Window;
  int order = 0;  // Window only

  static FeatureMode window(int l) { return {FeatureKind::Window, l}; }
  static FeatureMode dag() { return {FeatureKind::DagState, 0}; }
  static FeatureMode reward_parents() { return {FeatureKind::RewardParents, 0}; }
  friend bool operator==(const FeatureMode&, const FeatureMode&) = default;
};

std::string mode_name(const FeatureMode& f);  // "window(1)", "dag", "reward-parents"

inline constexpr double kSentinel = -10.0;
/// Standardized values are clamped to +-kClamp, so no observation meets the sentinel.
inline constexpr double kClamp = 8.0;

/// Running mean and variance per variable index, pooled over time steps.
class Standardizer {
 public:
  explicit Standardizer(int vars_per_step, bool enabled = true);
  void observe(const std::vector<double>& flat_obs);  // any number of whole steps
  double apply(int index, double raw) const;
  bool enabled() const { return enabled_; }

 private:
  bool enabled_;
  std::vector<long> n_;
  std::vector<double> mean_, m2_;
};

/// Fixed-width network input. Slot (h - t)*m + i holds X_t^i; unselected
/// slots hold the sentinel.
class Featurizer {
 public:
  /// `graph` may be null; then DagState and RewardParents throw std::domain_error.
  /// Throws if a DagState node sits further back than w_max.
  Featurizer(int vars_per_step, int horizon, int w_max, const FullTimeGraph* graph);

  int width() const { return m_ * (w_max_ + 1); }
  int w_max() const { return w_max_; }
  int vars_per_step() const { return m_; }
  int horizon() const { return horizon_; }

  /// Writes width() values. `obs` holds steps 0..h flattened (m per step).
  void featurize(const FeatureMode& mode, int h, const double* obs, const Standardizer& st, float* out) const;
  std::vector<float> featurize(const FeatureMode& mode, int h, const std::vector<double>& obs,
                               const Standardizer& st) const;

  /// Selected (slot, flat observation index) pairs.
  const std::vector<std::pair<int, int>>& selection(const FeatureMode& mode, int h) const;

 private:
  int m_, horizon_, w_max_;
  std::vector<std::vector<std::vector<std::pair<int, int>>>> windows_;  // [l][h]
  std::vector<std::vector<std::pair<int, int>>> dag_, parents_;          // [h]
  bool has_graph_;
};

struct EpisodeRecord {
  std::vector<double> obs;  // (T + 1) * m
  std::vector<int> actions;
  std::vector<double> rewards;
};

/// FIFO store of whole episodes bounded by a transition count.
class ReplayBuffer {
 public:
  ReplayBuffer(long capacity_transitions, int steps_per_episode);
  void add(EpisodeRecord e);
  long transitions() const { return static_cast<long>(episodes_.size()) * steps_; }
  std::size_t episodes() const { return episodes_.size(); }
  const EpisodeRecord& at(std::size_t k) const { return episodes_[k]; }
  /// min(n, episodes()) distinct episode indices.
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  long capacity_;
  int steps_;
  std::deque<EpisodeRecord> episodes_;
};

struct AgentConfig {
  int hidden = 128;
  int hidden_layers = 2;
  int batch = 64;
  long replay_capacity = 50000;
  long learning_starts = 32;  // transitions
  int target_interval = 50;   // updates of the same net
  double lr = 1e-3;
  double adam_eps = 1e-8;
  double clip = 10.0;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.1;  // of total episodes
  long total_episodes = 10000;
  int w_max = 1;
  bool standardize = true;
};

Json agent_config_to_json(const AgentConfig& c);
AgentConfig agent_config_from_json(const Json& j);

/// Per-step online/target nets with Adam state and update counters.
struct QEnsemble {
  std::vector<Net> online, target;
  std::vector<AdamState<float>> adam;
  std::vector<long> updates;  // per h

  QEnsemble(int steps, const std::vector<int>& sizes, const AgentConfig& cfg, std::uint64_t seed);
  int steps() const { return static_cast<int>(online.size()); }
};

/// Lowest index among the maximal entries.
int argmax_lowest(const float* q, int n);

class Agent {
 public:
  Agent(const AgentConfig& cfg, int vars_per_step, int horizon, int n_actions, const FullTimeGraph* graph,
        std::uint64_t seed);

  const AgentConfig& config() const { return cfg_; }
  const Featurizer& featurizer() const { return feat_; }
  QEnsemble& ensemble() { return ens_; }
  const ReplayBuffer& replay() const { return replay_; }
  Standardizer& standardizer() { return std_; }

  double epsilon(long episode) const;

  /// Greedy on online net h with probability 1 - eps, uniform otherwise.
  int act(const std::vector<float>& x, int h, double eps);

  /// One Adam step on net h against the double-Q target; both s_h and s_{h+1}
  /// use `mode`. Returns the loss, or nullopt while replay holds fewer than
  /// learning_starts transitions.
  std::optional<double> td_update(const std::vector<std::size_t>& batch, int h, const FeatureMode& mode);

  /// Rollout acting on Window(w_max), then for h = H..0 one batch and an
  /// update per order l = 0..w, plus one DagState update after l = w when causal.
  double train_episode_mose(Environment& env, int w, bool causal, long episode, std::uint64_t env_seed);
  /// Rollout and updates with one featurization, grad_steps updates per batch.
  double train_episode_baseline(Environment& env, const FeatureMode& mode, int grad_steps, long episode,
                                std::uint64_t env_seed);

  long total_updates() const { return total_updates_; }
  long last_episode_updates() const { return episode_updates_; }

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  double rollout(Environment& env, const FeatureMode& mode, long episode, std::uint64_t env_seed);

  AgentConfig cfg_;
  int m_, horizon_, n_actions_;
  Featurizer feat_;
  Standardizer std_;
  ReplayBuffer replay_;
  QEnsemble ens_;
  std::mt19937_64 rng_;
  long total_updates_ = 0;
  long episode_updates_ = 0;
  std::vector<float> xbuf_;
};

}  // namespace mose
