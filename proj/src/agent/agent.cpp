#include "mose/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mose {

std::string mode_name(const FeatureMode& f) {
  switch (f.kind) {
    case FeatureKind::Window: return "window(" + std::to_string(f.order) + ")";
    case FeatureKind::DagState: return "dag";
    case FeatureKind::RewardParents: return "reward-parents";
  }
  return "?";
}

// ---------------------------------------------------------------- Standardizer

Standardizer::Standardizer(int vars_per_step, bool enabled)
    : enabled_(enabled), n_(vars_per_step, 0), mean_(vars_per_step, 0.0), m2_(vars_per_step, 0.0) {}

void Standardizer::observe(const std::vector<double>& flat) {
  const std::size_t m = n_.size();
  if (flat.size() % m != 0) throw std::domain_error("observation vector is not a whole number of steps");
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const std::size_t i = k % m;
    ++n_[i];
    const double d = flat[k] - mean_[i];
    mean_[i] += d / static_cast<double>(n_[i]);
    m2_[i] += d * (flat[k] - mean_[i]);
  }
}

double Standardizer::apply(int i, double raw) const {
  double z = raw;
  if (enabled_ && n_[i] > 0) {
    z -= mean_[i];
    if (n_[i] > 1) {
      const double sd = std::sqrt(m2_[i] / static_cast<double>(n_[i] - 1));
      if (sd > 1e-8) z /= sd;
    }
  }
  return std::clamp(z, -kClamp, kClamp);
}

// ---------------------------------------------------------------- Featurizer

Featurizer::Featurizer(int m, int horizon, int w_max, const FullTimeGraph* g)
    : m_(m), horizon_(horizon), w_max_(w_max), has_graph_(g != nullptr) {
  if (m < 1 || horizon < 0 || w_max < 0) throw std::domain_error("bad featurizer shape");
  windows_.resize(w_max + 1);
  for (int l = 0; l <= w_max; ++l) {
    windows_[l].resize(horizon + 1);
    for (int h = 0; h <= horizon; ++h)
      for (int t = std::max(h - l, 0); t <= h; ++t)
        for (int i = 0; i < m; ++i) windows_[l][h].push_back({(h - t) * m + i, t * m + i});
  }
  if (!g) return;
  if (g->vars_per_step() != m || g->horizon() != horizon) throw std::domain_error("graph shape differs from featurizer");
  auto place = [&](const NodeSet& nodes, int h, std::vector<std::pair<int, int>>& out) {
    for (const auto& v : nodes) {
      if (h - v.time > w_max)
        throw std::domain_error(to_string(v) + " lies " + std::to_string(h - v.time) + " steps back at h=" +
                                std::to_string(h) + ", beyond w_max=" + std::to_string(w_max));
      out.push_back({(h - v.time) * m + v.index, v.time * m + v.index});
    }
  };
  const auto seq = construct_minimal_states(*g);
  dag_.resize(horizon + 1);
  parents_.resize(horizon + 1);
  for (int h = 0; h <= horizon; ++h) {
    place(seq.states[h], h, dag_[h]);
    place(reward_parents(*g, h), h, parents_[h]);
  }
}

const std::vector<std::pair<int, int>>& Featurizer::selection(const FeatureMode& mode, int h) const {
  if (h < 0 || h > horizon_) throw std::domain_error("step " + std::to_string(h) + " outside the horizon");
  switch (mode.kind) {
    case FeatureKind::Window:
      if (mode.order < 0 || mode.order > w_max_)
        throw std::domain_error("window order " + std::to_string(mode.order) + " exceeds w_max " +
                                std::to_string(w_max_));
      return windows_[mode.order][h];
    case FeatureKind::DagState:
    case FeatureKind::RewardParents:
      if (!has_graph_) throw std::domain_error(mode_name(mode) + " features need the causal graph");
      return mode.kind == FeatureKind::DagState ? dag_[h] : parents_[h];
  }
  throw std::domain_error("unknown feature mode");
}

void Featurizer::featurize(const FeatureMode& mode, int h, const double* obs, const Standardizer& st,
                           float* out) const {
  const auto& sel = selection(mode, h);
  std::fill(out, out + width(), static_cast<float>(kSentinel));
  for (const auto& [slot, flat] : sel) {
    const double z = st.apply(flat % m_, obs[flat]);
    if (z == kSentinel) throw std::logic_error("an observation collided with the sentinel");
    out[slot] = static_cast<float>(z);
  }
}

std::vector<float> Featurizer::featurize(const FeatureMode& mode, int h, const std::vector<double>& obs,
                                         const Standardizer& st) const {
  if (static_cast<int>(obs.size()) < (h + 1) * m_) throw std::domain_error("history does not reach step h");
  std::vector<float> out(width());
  featurize(mode, h, obs.data(), st, out.data());
  return out;
}

// ---------------------------------------------------------------- ReplayBuffer

ReplayBuffer::ReplayBuffer(long capacity, int steps) : capacity_(capacity), steps_(steps) {
  if (capacity < steps || steps < 1) throw std::domain_error("replay must hold at least one episode");
}

void ReplayBuffer::add(EpisodeRecord e) {
  episodes_.push_back(std::move(e));
  while (transitions() > capacity_) episodes_.pop_front();
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  const std::size_t size = episodes_.size();
  n = std::min(n, size);
  // partial Fisher-Yates over indices
  std::vector<std::size_t> idx(size);
  for (std::size_t k = 0; k < size; ++k) idx[k] = k;
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, size - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

// ---------------------------------------------------------------- config

Json agent_config_to_json(const AgentConfig& c) {
  return Json{{"hidden", c.hidden},
              {"hidden_layers", c.hidden_layers},
              {"batch", c.batch},
              {"replay_capacity", c.replay_capacity},
              {"learning_starts", c.learning_starts},
              {"target_interval", c.target_interval},
              {"lr", c.lr},
              {"adam_eps", c.adam_eps},
              {"clip", c.clip},
              {"eps_start", c.eps_start},
              {"eps_end", c.eps_end},
              {"eps_fraction", c.eps_fraction},
              {"total_episodes", c.total_episodes},
              {"w_max", c.w_max},
              {"standardize", c.standardize},
              {"sentinel", kSentinel},
              {"activation", "relu"},
              {"init", "uniform(+-1/sqrt(fan_in))"}};
}

AgentConfig agent_config_from_json(const Json& j) {
  AgentConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
  c.batch = j.value("batch", c.batch);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.learning_starts = j.value("learning_starts", c.learning_starts);
  c.target_interval = j.value("target_interval", c.target_interval);
  c.lr = j.value("lr", c.lr);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip = j.value("clip", c.clip);
  c.eps_start = j.value("eps_start", c.eps_start);
  c.eps_end = j.value("eps_end", c.eps_end);
  c.eps_fraction = j.value("eps_fraction", c.eps_fraction);
  c.total_episodes = j.value("total_episodes", c.total_episodes);
  c.w_max = j.value("w_max", c.w_max);
  c.standardize = j.value("standardize", c.standardize);
  return c;
}

// ---------------------------------------------------------------- ensemble

QEnsemble::QEnsemble(int steps, const std::vector<int>& sizes, const AgentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 seeder(seed);
  for (int h = 0; h < steps; ++h) {
    online.emplace_back(sizes, seeder());
    target.push_back(online.back());
    auto opt = AdamState<float>::like(online.back());
    opt.lr = cfg.lr;
    opt.eps = cfg.adam_eps;
    adam.push_back(std::move(opt));
  }
  updates.assign(steps, 0);
}

int argmax_lowest(const float* q, int n) {
  int best = 0;
  for (int a = 1; a < n; ++a)
    if (q[a] > q[best]) best = a;
  return best;
}

// ---------------------------------------------------------------- agent

namespace {

std::vector<int> net_sizes(const AgentConfig& cfg, int d_in, int n_actions) {
  std::vector<int> s{d_in};
  for (int k = 0; k < cfg.hidden_layers; ++k) s.push_back(cfg.hidden);
  s.push_back(n_actions);
  return s;
}

}  // namespace

Agent::Agent(const AgentConfig& cfg, int m, int horizon, int n_actions, const FullTimeGraph* graph, std::uint64_t seed)
    : cfg_(cfg),
      m_(m),
      horizon_(horizon),
      n_actions_(n_actions),
      feat_(m, horizon, cfg.w_max, graph),
      std_(m, cfg.standardize),
      replay_(cfg.replay_capacity, horizon + 1),
      ens_(horizon + 1, net_sizes(cfg, m * (cfg.w_max + 1), n_actions), cfg, seed),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  if (n_actions < 2) throw std::domain_error("need at least two actions");
  if (cfg.batch < 1 || cfg.target_interval < 1) throw std::domain_error("batch and target interval must be positive");
  xbuf_.resize(feat_.width());
}

double Agent::epsilon(long episode) const {
  const double span = cfg_.eps_fraction * static_cast<double>(cfg_.total_episodes);
  if (span <= 0.0) return cfg_.eps_end;
  const double frac = std::min(1.0, static_cast<double>(episode) / span);
  return cfg_.eps_start + (cfg_.eps_end - cfg_.eps_start) * frac;
}

int Agent::act(const std::vector<float>& x, int h, double eps) {
  if (h < 0 || h >= ens_.steps()) throw std::domain_error("no network for step " + std::to_string(h));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (eps > 0.0 && unit(rng_) < eps) {
    std::uniform_int_distribution<int> pick(0, n_actions_ - 1);
    return pick(rng_);
  }
  const auto q = ens_.online[h].forward(Eigen::Map<const Net::Vector>(x.data(), static_cast<Eigen::Index>(x.size())));
  return argmax_lowest(q.data(), n_actions_);
}

std::optional<double> Agent::td_update(const std::vector<std::size_t>& batch, int h, const FeatureMode& mode) {
  if (replay_.transitions() < cfg_.learning_starts || batch.empty()) return std::nullopt;
  if (h < 0 || h > horizon_) throw std::domain_error("update step outside the horizon");
  const int d = feat_.width();
  const auto B = static_cast<Eigen::Index>(batch.size());
  Net::Matrix x(d, B);
  std::vector<int> actions(B);
  Net::Vector y(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& e = replay_.at(batch[b]);
    feat_.featurize(mode, h, e.obs.data(), std_, x.col(b).data());
    actions[b] = e.actions[h];
    y(b) = static_cast<float>(e.rewards[h]);
  }
  if (h < horizon_) {
    Net::Matrix x1(d, B);
    for (Eigen::Index b = 0; b < B; ++b)
      feat_.featurize(mode, h + 1, replay_.at(batch[b]).obs.data(), std_, x1.col(b).data());
    const Net::Matrix q_on = ens_.online[h + 1].forward_batch(x1);
    const Net::Matrix q_tg = ens_.target[h + 1].forward_batch(x1);
    for (Eigen::Index b = 0; b < B; ++b) y(b) += q_tg(argmax_lowest(q_on.col(b).data(), n_actions_), b);
  }
  Gradients<float> g;
  const float loss = td_gradient(ens_.online[h], x, actions, y, g, static_cast<float>(cfg_.clip));
  adam_step(ens_.online[h], g, ens_.adam[h]);
  if (++ens_.updates[h] % cfg_.target_interval == 0) ens_.target[h] = ens_.online[h];
  ++total_updates_;
  ++episode_updates_;
  return loss;
}

double Agent::rollout(Environment& env, const FeatureMode& mode, long episode, std::uint64_t env_seed) {
  const double eps = epsilon(episode);
  env.reset(env_seed);
  double total = 0.0;
  for (int h = 0; h <= horizon_; ++h) {
    feat_.featurize(mode, h, env.history().data(), std_, xbuf_.data());
    const int a = act(xbuf_, h, eps);
    total += env.step(a).reward;
  }
  EpisodeRecord rec{env.history(), env.actions(), env.rewards()};
  std_.observe(rec.obs);
  replay_.add(std::move(rec));
  return total;
}

double Agent::train_episode_mose(Environment& env, int w, bool causal, long episode, std::uint64_t env_seed) {
  if (w < 0 || w > cfg_.w_max) throw std::domain_error("MOSE order must lie in [0, w_max]");
  if (causal) feat_.selection(FeatureMode::dag(), 0);  // throws without a graph
  episode_updates_ = 0;
  const double reward = rollout(env, FeatureMode::window(cfg_.w_max), episode, env_seed);
  if (replay_.transitions() < cfg_.learning_starts) return reward;
  for (int h = horizon_; h >= 0; --h) {
    const auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch), rng_);
    for (int l = 0; l <= w; ++l) td_update(batch, h, FeatureMode::window(l));
    if (causal) td_update(batch, h, FeatureMode::dag());
  }
  return reward;
}

double Agent::train_episode_baseline(Environment& env, const FeatureMode& mode, int grad_steps, long episode,
                                     std::uint64_t env_seed) {
  if (grad_steps < 1) throw std::domain_error("grad_steps must be >= 1");
  feat_.selection(mode, 0);
  episode_updates_ = 0;
  const double reward = rollout(env, mode, episode, env_seed);
  if (replay_.transitions() < cfg_.learning_starts) return reward;
  for (int h = horizon_; h >= 0; --h) {
    const auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch), rng_);
    for (int k = 0; k < grad_steps; ++k) td_update(batch, h, mode);
  }
  return reward;
}

void Agent::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& net : ens_.online) write_net(out, net);
}

void Agent::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  for (int h = 0; h < ens_.steps(); ++h) {
    auto net = read_net<float>(in);
    if (net.sizes() != ens_.online[h].sizes()) throw std::runtime_error("checkpoint shape differs from the agent");
    ens_.online[h] = net;
    ens_.target[h] = std::move(net);
  }
}

}  // namespace mose
