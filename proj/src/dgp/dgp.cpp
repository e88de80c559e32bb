#include "mose/dgp.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace mose {
namespace {

double contribution(DgpFamily f, double c, bool reward, double x) {
  switch (f) {
    case DgpFamily::LinearAnm: return x;
    case DgpFamily::TanhPnl: return c * std::tanh(x);
    case DgpFamily::SinCosPnl: {
      const double squashed = x / (1.0 + std::abs(x));
      return reward ? c * squashed : c * squashed * (std::sin(x) + std::cos(x));
    }
  }
  return x;
}

double finish(DgpFamily f, double inner) { return f == DgpFamily::LinearAnm ? inner : inner * inner; }

}  // namespace

std::string family_name(DgpFamily f) {
  switch (f) {
    case DgpFamily::LinearAnm: return "linear";
    case DgpFamily::TanhPnl: return "tanh";
    case DgpFamily::SinCosPnl: return "sincos";
  }
  return "?";
}

DgpFamily family_from_name(const std::string& s) {
  if (s == "linear") return DgpFamily::LinearAnm;
  if (s == "tanh") return DgpFamily::TanhPnl;
  if (s == "sincos") return DgpFamily::SinCosPnl;
  throw std::domain_error("unknown DGP family '" + s + "' (linear, tanh, sincos)");
}

DgpSpec sample_spec(const FullTimeGraph& g, DgpFamily family, std::uint64_t seed, double scale) {
  DgpSpec s{g, family, {}, 0.0, {}, scale, 1.0, 2, seed};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> weight(-1.0, 1.0);
  s.bias.resize(g.vars_per_step());
  for (auto& b : s.bias) b = normal(rng);
  s.reward_bias = normal(rng);
  for (const auto& e : g.edges()) s.weights.emplace(e, weight(rng));
  return s;
}

void check_spec(const DgpSpec& spec) {
  const auto& g = spec.graph;
  if (static_cast<int>(spec.bias.size()) != g.vars_per_step())
    throw std::domain_error("spec needs one bias per variable index");
  if (spec.weights.size() != g.edges().size()) throw std::domain_error("spec weights must match the graph edges");
  for (const auto& e : g.edges())
    if (!spec.weights.contains(e)) throw std::domain_error("no weight for edge " + to_string(e.from) + "->" + to_string(e.to));
  if (spec.action_arity < 2) throw std::domain_error("action arity must be >= 2");
  if (spec.noise_scale < 0.0) throw std::domain_error("noise scale must be >= 0");
}

double evaluate_node(const DgpSpec& spec, const NodeId& v, const std::vector<double>& values, double noise) {
  const auto& g = spec.graph;
  if (!g.contains(v) || v.is_action()) throw std::domain_error("cannot evaluate " + to_string(v));
  if (values.size() != g.node_count()) throw std::domain_error("value vector must cover every node");
  double inner = v.is_reward() ? spec.reward_bias : spec.bias[v.index];
  for (const auto& p : g.parents(v)) {
    const double w = spec.weights.at(Edge{p, v});
    const double x = values[g.dense_index(p)];
    inner += p.is_action() ? w * x : w * contribution(spec.family, spec.scale, v.is_reward(), x);
  }
  return finish(spec.family, inner + noise);
}

Environment::Environment(DgpSpec spec) : spec_(std::move(spec)) {
  check_spec(spec_);
  const auto& g = spec_.graph;
  terms_.resize(g.node_count());
  bias_of_.assign(g.node_count(), 0.0);
  is_reward_.assign(g.node_count(), 0);
  for (const auto& v : g.nodes()) {
    if (v.is_action()) continue;
    const int d = g.dense_index(v);
    is_reward_[d] = v.is_reward();
    bias_of_[d] = v.is_reward() ? spec_.reward_bias : spec_.bias[v.index];
    for (const auto& p : g.parents(v)) terms_[d].push_back({g.dense_index(p), spec_.weights.at(Edge{p, v}), p.is_action()});
  }
  values_.assign(g.node_count(), 0.0);
}

double Environment::draw_noise() { return spec_.noise_scale * noise_(rng_); }

double Environment::eval(int d, double noise) const {
  const bool reward = is_reward_[d];
  double inner = bias_of_[d];
  for (const auto& term : terms_[d]) {
    const double x = values_[term.dense];
    inner += term.action ? term.weight * x : term.weight * contribution(spec_.family, spec_.scale, reward, x);
  }
  return finish(spec_.family, inner + noise);
}

const std::vector<double>& Environment::reset(std::uint64_t episode_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32),
                    static_cast<std::uint32_t>(episode_seed), static_cast<std::uint32_t>(episode_seed >> 32)};
  rng_.seed(seq);
  std::fill(values_.begin(), values_.end(), 0.0);
  history_.clear();
  rewards_.clear();
  actions_.clear();
  const auto& g = spec_.graph;
  for (const auto& v : g.topological_order())
    if (v.time == 0 && v.is_observation()) values_[g.dense_index(v)] = eval(g.dense_index(v), draw_noise());
  for (int i = 0; i < g.vars_per_step(); ++i) history_.push_back(values_[g.dense_index(NodeId::obs(0, i))]);
  t_ = 0;
  done_ = false;
  return history_;
}

StepResult Environment::step(int a) {
  if (done_) throw std::domain_error("step called on a finished or unstarted episode");
  if (a < 0 || a >= spec_.action_arity) throw std::domain_error("action " + std::to_string(a) + " out of range");
  const auto& g = spec_.graph;
  values_[g.dense_index(NodeId::action(t_))] = static_cast<double>(a);
  actions_.push_back(a);
  StepResult out;
  const int r = g.dense_index(NodeId::reward(t_));
  values_[r] = eval(r, draw_noise());
  out.reward = values_[r];
  rewards_.push_back(out.reward);
  if (t_ == g.horizon()) {
    out.done = done_ = true;
    return out;
  }
  const int next = t_ + 1;
  for (const auto& v : g.topological_order())
    if (v.time == next && v.is_observation()) values_[g.dense_index(v)] = eval(g.dense_index(v), draw_noise());
  out.next.resize(g.vars_per_step());
  for (int i = 0; i < g.vars_per_step(); ++i) out.next[i] = values_[g.dense_index(NodeId::obs(next, i))];
  history_.insert(history_.end(), out.next.begin(), out.next.end());
  t_ = next;
  return out;
}

Json spec_to_json(const DgpSpec& spec) {
  Json weights = Json::array();
  for (const auto& [e, w] : spec.weights) weights.push_back(Json::array({node_to_json(e.from), node_to_json(e.to), w}));
  return Json{{"family", family_name(spec.family)}, {"seed", spec.seed},
              {"scale", spec.scale},                 {"noise_scale", spec.noise_scale},
              {"action_arity", spec.action_arity},   {"weight_law", "uniform[-1,1]"},
              {"bias", spec.bias},                   {"reward_bias", spec.reward_bias},
              {"weights", weights},                  {"graph", graph_to_json(spec.graph)}};
}

DgpSpec spec_from_json(const Json& j) {
  DgpSpec s{graph_from_json(j.at("graph")),
            family_from_name(j.at("family").get<std::string>()),
            j.at("bias").get<std::vector<double>>(),
            j.at("reward_bias").get<double>(),
            {},
            j.value("scale", 1.0),
            j.value("noise_scale", 1.0),
            j.value("action_arity", 2),
            j.value("seed", std::uint64_t{0})};
  for (const auto& w : j.at("weights")) s.weights.emplace(Edge{node_from_json(w[0]), node_from_json(w[1])}, w[2].get<double>());
  check_spec(s);
  return s;
}

std::string trajectories_to_csv(const std::vector<Trajectory>& episodes) {
  std::ostringstream os;
  os << std::setprecision(17);
  const std::size_t m = episodes.empty() || episodes[0].obs.empty() ? 0 : episodes[0].obs[0].size();
  os << "episode,t";
  for (std::size_t i = 0; i < m; ++i) os << ",x" << i;
  os << ",a,r\n";
  for (std::size_t e = 0; e < episodes.size(); ++e)
    for (std::size_t t = 0; t < episodes[e].obs.size(); ++t) {
      os << e << ',' << t;
      for (double v : episodes[e].obs[t]) os << ',' << v;
      os << ',' << episodes[e].actions[t] << ',' << episodes[e].rewards[t] << '\n';
    }
  return os.str();
}

}  // namespace mose
