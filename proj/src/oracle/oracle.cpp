#include "mose/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <random>

namespace mose {
namespace {

std::size_t radix(const NodeId& p, int arity) { return p.is_action() ? static_cast<std::size_t>(arity) : 2; }

std::size_t row_count(const std::vector<NodeId>& parents, int arity) {
  std::size_t n = 1;
  for (const auto& p : parents) n *= radix(p, arity);
  return n;
}

// Digit of parent `k` in a CPT row.
std::size_t digit(const std::vector<NodeId>& parents, int arity, std::size_t row, std::size_t k) {
  for (std::size_t j = 0; j < k; ++j) row /= radix(parents[j], arity);
  return row % radix(parents[k], arity);
}

std::vector<NodeId> as_vector(const NodeSet& s) { return {s.begin(), s.end()}; }

Cpt zero_cpt(const FullTimeGraph& g, const NodeId& v, int arity) {
  Cpt c{v, as_vector(g.parents(v)), {}};
  c.p_one.assign(row_count(c.parents, arity), 0.0);
  return c;
}

void check_states(const TabularScm& scm, const StateSequence& s) {
  const auto& g = scm.graph();
  if (s.horizon() != g.horizon()) throw std::domain_error("state sequence horizon does not match the model");
  for (int t = 0; t <= g.horizon(); ++t)
    for (const auto& v : s.states[t])
      if (!v.is_observation() || v.time > t || !g.contains(v))
        throw std::domain_error("S_" + std::to_string(t) + " holds " + to_string(v));
}

std::vector<double> policy_or_uniform(const BehaviorPolicy& pi, int arity) {
  if (pi.empty()) return std::vector<double>(arity, 1.0 / arity);
  if (static_cast<int>(pi.size()) != arity) throw std::domain_error("behavior policy size differs from action arity");
  double total = 0.0;
  for (double p : pi) {
    if (!(p > 0.0)) throw std::domain_error("behavior policy must be strictly positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::domain_error("behavior policy must sum to 1");
  return pi;
}

int bits_at(const TabularScm& scm, int t) { return scm.graph().vars_per_step() * (t + 1); }

}  // namespace

TabularScm::TabularScm(FullTimeGraph g, int action_arity, std::vector<Cpt> cpts)
    : g_(std::move(g)), arity_(action_arity), cpts_(std::move(cpts)) {
  if (arity_ < 2) throw std::domain_error("action arity must be >= 2");
  const int bits = g_.vars_per_step() * (g_.horizon() + 1);
  if (bits > kMaxObservationBits)
    throw CapacityError("tabular model needs " + std::to_string(bits) + " observation bits, limit is " +
                        std::to_string(kMaxObservationBits));
  std::sort(cpts_.begin(), cpts_.end(), [](const Cpt& a, const Cpt& b) { return a.node < b.node; });
  cpt_of_dense_.assign(g_.node_count(), -1);
  for (std::size_t k = 0; k < cpts_.size(); ++k) {
    const auto& c = cpts_[k];
    if (!g_.contains(c.node) || c.node.is_action()) throw std::domain_error("CPT for " + to_string(c.node));
    int& slot = cpt_of_dense_[g_.dense_index(c.node)];
    if (slot >= 0) throw std::domain_error("duplicate CPT for " + to_string(c.node));
    slot = static_cast<int>(k);
    if (c.parents != as_vector(g_.parents(c.node)))
      throw std::domain_error("CPT parents of " + to_string(c.node) + " differ from the graph");
    if (c.p_one.size() != row_count(c.parents, arity_))
      throw std::domain_error("CPT of " + to_string(c.node) + " has " + std::to_string(c.p_one.size()) + " rows");
    for (double p : c.p_one)
      if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("CPT entry outside [0, 1] at " + to_string(c.node));
  }
  for (const auto& v : g_.nodes())
    if (!v.is_action() && cpt_of_dense_[g_.dense_index(v)] < 0)
      throw std::domain_error("missing CPT for " + to_string(v));

  const int m = g_.vars_per_step();
  slots_.resize(cpts_.size());
  for (std::size_t k = 0; k < cpts_.size(); ++k) {
    std::size_t stride = 1;
    for (const auto& p : cpts_[k].parents) {
      slots_[k].push_back({p.is_action(), p.is_action() ? -1 : p.time * m + p.index, stride});
      stride *= radix(p, arity_);
    }
  }
}

const Cpt& TabularScm::cpt(const NodeId& v) const {
  if (!g_.contains(v)) throw std::domain_error("unknown node " + to_string(v));
  const int k = cpt_of_dense_[g_.dense_index(v)];
  if (k < 0) throw std::domain_error("no CPT for " + to_string(v));
  return cpts_[k];
}

double TabularScm::p_one(const NodeId& v, std::uint64_t history, int action) const {
  const int k = cpt_of_dense_[g_.dense_index(v)];
  std::size_t row = 0;
  for (const auto& s : slots_[k])
    row += s.stride * (s.action ? static_cast<std::size_t>(action) : ((history >> s.bit) & 1U));
  return cpts_[k].p_one[row];
}

double TabularScm::transition(int t, std::uint64_t history, int a, std::uint32_t next) const {
  const int m = g_.vars_per_step();
  const std::uint64_t full = history | (static_cast<std::uint64_t>(next) << (m * (t + 1)));
  double prob = 1.0;
  for (int i = 0; i < m && prob > 0.0; ++i) {
    const double p = p_one(NodeId::obs(t + 1, i), full, a);
    prob *= ((next >> i) & 1U) ? p : 1.0 - p;
  }
  return prob;
}

double TabularScm::initial(std::uint32_t x0) const {
  double prob = 1.0;
  for (int i = 0; i < g_.vars_per_step() && prob > 0.0; ++i) {
    const double p = p_one(NodeId::obs(0, i), x0, 0);
    prob *= ((x0 >> i) & 1U) ? p : 1.0 - p;
  }
  return prob;
}

TabularScm random_tabular_scm(const FullTimeGraph& g, int action_arity, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> obs(lo, hi), rew(0.0, 1.0);
  std::vector<Cpt> cpts;
  for (const auto& v : g.nodes()) {
    if (v.is_action()) continue;
    Cpt c = zero_cpt(g, v, action_arity);
    for (auto& p : c.p_one) p = v.is_reward() ? rew(rng) : obs(rng);
    cpts.push_back(std::move(c));
  }
  return TabularScm(g, action_arity, std::move(cpts));
}

Json tabular_scm_to_json(const TabularScm& scm) {
  Json cpts = Json::array();
  for (const auto& c : scm.cpts()) {
    Json parents = Json::array();
    for (const auto& p : c.parents) parents.push_back(node_to_json(p));
    cpts.push_back(Json{{"node", node_to_json(c.node)}, {"parents", parents}, {"p_one", c.p_one}});
  }
  return Json{{"graph", graph_to_json(scm.graph())}, {"action_arity", scm.action_arity()}, {"cpts", cpts}};
}

TabularScm tabular_scm_from_json(const Json& j) {
  std::vector<Cpt> cpts;
  for (const auto& c : j.at("cpts")) {
    Cpt cpt{node_from_json(c.at("node")), {}, c.at("p_one").get<std::vector<double>>()};
    for (const auto& p : c.at("parents")) cpt.parents.push_back(node_from_json(p));
    cpts.push_back(std::move(cpt));
  }
  return TabularScm(graph_from_json(j.at("graph")), j.at("action_arity").get<int>(), std::move(cpts));
}

std::vector<std::vector<double>> history_distributions(const TabularScm& scm, const BehaviorPolicy& pi_in) {
  const auto pi = policy_or_uniform(pi_in, scm.action_arity());
  const int m = scm.graph().vars_per_step(), T = scm.graph().horizon();
  std::vector<std::vector<double>> dist(T + 1);
  dist[0].resize(std::size_t{1} << m);
  for (std::uint32_t x = 0; x < dist[0].size(); ++x) dist[0][x] = scm.initial(x);
  for (int t = 0; t < T; ++t) {
    auto& next = dist[t + 1];
    next.assign(std::size_t{1} << bits_at(scm, t + 1), 0.0);
    for (std::uint64_t h = 0; h < dist[t].size(); ++h) {
      const double ph = dist[t][h];
      if (ph == 0.0) continue;
      for (int a = 0; a < scm.action_arity(); ++a)
        for (std::uint32_t x = 0; x < (1U << m); ++x) {
          const double p = scm.transition(t, h, a, x);
          if (p != 0.0) next[h | (static_cast<std::uint64_t>(x) << bits_at(scm, t))] += ph * pi[a] * p;
        }
    }
  }
  return dist;
}

std::uint64_t state_key(const std::vector<NodeId>& nodes, int vars_per_step, std::uint64_t history) {
  std::uint64_t key = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k)
    key |= ((history >> (nodes[k].time * vars_per_step + nodes[k].index)) & 1U) << k;
  return key;
}

double QTable::value(int t) const {
  double v = 0.0;
  for (const auto& [s, p] : mass[t]) {
    const auto& row = q[t].at(s);
    v += p * *std::max_element(row.begin(), row.end());
  }
  return v;
}

const std::vector<double>& QTable::at(int t, std::uint64_t history, int vars_per_step) const {
  return q[t].at(state_key(state_nodes[t], vars_per_step, history));
}

QTable exact_q(const TabularScm& scm, const StateSequence& states, const BehaviorPolicy& pi) {
  check_states(scm, states);
  const int m = scm.graph().vars_per_step(), T = scm.graph().horizon(), k = scm.action_arity();
  const auto dist = history_distributions(scm, pi);
  QTable out;
  out.state_nodes.resize(T + 1);
  out.q.resize(T + 1);
  out.mass.resize(T + 1);
  for (int t = 0; t <= T; ++t) out.state_nodes[t] = as_vector(states.states[t]);

  std::map<std::uint64_t, double> v_next;
  for (int t = T; t >= 0; --t) {
    std::map<std::uint64_t, std::vector<double>> acc;
    auto& mass = out.mass[t];
    for (std::uint64_t h = 0; h < dist[t].size(); ++h) {
      const double ph = dist[t][h];
      if (ph == 0.0) continue;
      const auto s = state_key(out.state_nodes[t], m, h);
      auto& row = acc[s];
      row.resize(k, 0.0);
      mass[s] += ph;
      for (int a = 0; a < k; ++a) {
        double value = scm.p_one(NodeId::reward(t), h, a);
        if (t < T)
          for (std::uint32_t x = 0; x < (1U << m); ++x) {
            const double p = scm.transition(t, h, a, x);
            if (p == 0.0) continue;
            const std::uint64_t h2 = h | (static_cast<std::uint64_t>(x) << bits_at(scm, t));
            value += p * v_next.at(state_key(out.state_nodes[t + 1], m, h2));
          }
        row[a] += ph * value;
      }
    }
    v_next.clear();
    for (auto& [s, row] : acc) {
      for (auto& q : row) q /= mass[s];
      v_next[s] = *std::max_element(row.begin(), row.end());
    }
    out.q[t] = std::move(acc);
  }
  return out;
}

int greedy_action(const std::vector<double>& q, double tol) {
  if (q.empty()) throw std::domain_error("greedy action of an empty row");
  const double best = *std::max_element(q.begin(), q.end());
  for (std::size_t a = 0; a < q.size(); ++a)
    if (q[a] >= best - tol) return static_cast<int>(a);
  return 0;
}

QComparison compare_q(const TabularScm& scm, const QTable& a, const QTable& b, double tol) {
  const int m = scm.graph().vars_per_step();
  const auto dist = history_distributions(scm);
  QComparison cmp;
  for (int t = 0; t <= scm.graph().horizon(); ++t)
    for (std::uint64_t h = 0; h < dist[t].size(); ++h) {
      if (dist[t][h] == 0.0) continue;
      const auto& qa = a.at(t, h, m);
      const auto& qb = b.at(t, h, m);
      for (std::size_t k = 0; k < qa.size(); ++k) cmp.max_abs_diff = std::max(cmp.max_abs_diff, std::abs(qa[k] - qb[k]));
      if (greedy_action(qa, tol) != greedy_action(qb, tol)) ++cmp.argmax_mismatches;
      ++cmp.reachable;
    }
  return cmp;
}

namespace {

using Conditional = std::map<std::uint64_t, double>;

struct MarkovTables {
  // per t: (S_0, A_0, .., S_t, A_t) -> S_{t+1} -> mass
  std::vector<std::map<std::vector<std::uint64_t>, Conditional>> full;
  // per t: (S_t, A_t) -> S_{t+1} -> mass
  std::vector<std::map<std::pair<std::uint64_t, int>, Conditional>> local;
};

double total(const Conditional& c) {
  double s = 0.0;
  for (const auto& [k, v] : c) s += v;
  return s;
}

MarkovResult compare_tables(const MarkovTables& tab, const MarkovOptions& opt, bool sampled) {
  MarkovResult res;
  for (std::size_t t = 0; t < tab.full.size(); ++t) {
    for (const auto& [hist, cond] : tab.full[t]) {
      const double n = total(cond);
      if (sampled ? n < static_cast<double>(opt.min_visits) : n <= 0.0) {
        ++res.histories_skipped;
        continue;
      }
      const auto& loc = tab.local[t].at({hist[hist.size() - 2], static_cast<int>(hist.back())});
      const double nl = total(loc);
      double dev = 0.0;
      for (const auto& [s, p] : loc) {
        const auto it = cond.find(s);
        dev = std::max(dev, std::abs((it == cond.end() ? 0.0 : it->second / n) - p / nl));
      }
      ++res.histories_checked;
      if (dev > res.max_deviation) {
        res.max_deviation = dev;
        res.worst_t = static_cast<int>(t);
      }
    }
  }
  res.passed = res.max_deviation <= opt.tolerance;
  return res;
}

}  // namespace

MarkovResult test_markov(const TabularScm& scm, const StateSequence& states, const MarkovOptions& opt) {
  check_states(scm, states);
  const auto pi = policy_or_uniform(opt.behavior, scm.action_arity());
  const int m = scm.graph().vars_per_step(), T = scm.graph().horizon(), k = scm.action_arity();
  std::vector<std::vector<NodeId>> nodes(T + 1);
  for (int t = 0; t <= T; ++t) nodes[t] = as_vector(states.states[t]);
  MarkovTables tab;
  tab.full.resize(T);
  tab.local.resize(T);

  auto record = std::function<void(int, std::uint64_t, std::vector<std::uint64_t>&, int, std::uint64_t, double)>();
  record = [&](int t, std::uint64_t h, std::vector<std::uint64_t>& prefix, int a, std::uint64_t h2, double w) {
    const auto s_next = state_key(nodes[t + 1], m, h2);
    prefix.push_back(static_cast<std::uint64_t>(a));
    tab.full[t][prefix][s_next] += w;
    prefix.pop_back();
    tab.local[t][{state_key(nodes[t], m, h), a}][s_next] += w;
  };

  if (!opt.n_samples) {
    std::function<void(int, std::uint64_t, std::vector<std::uint64_t>&, double)> walk;
    walk = [&](int t, std::uint64_t h, std::vector<std::uint64_t>& prefix, double w) {
      if (t == T) return;
      prefix.push_back(state_key(nodes[t], m, h));
      for (int a = 0; a < k; ++a)
        for (std::uint32_t x = 0; x < (1U << m); ++x) {
          const double p = w * pi[a] * scm.transition(t, h, a, x);
          if (p == 0.0) continue;
          const std::uint64_t h2 = h | (static_cast<std::uint64_t>(x) << bits_at(scm, t));
          record(t, h, prefix, a, h2, p);
          prefix.push_back(static_cast<std::uint64_t>(a));
          walk(t + 1, h2, prefix, p);
          prefix.pop_back();
        }
      prefix.pop_back();
    };
    std::vector<std::uint64_t> prefix;
    for (std::uint32_t x = 0; x < (1U << m); ++x) {
      const double p = scm.initial(x);
      if (p > 0.0) walk(0, x, prefix, p);
    }
    return compare_tables(tab, opt, false);
  }

  if (*opt.n_samples <= 0) throw std::domain_error("sample count must be positive");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<int> act(pi.begin(), pi.end());
  const auto& order = scm.graph().topological_order();
  auto draw_step = [&](int t, std::uint64_t h, int a) {
    for (const auto& v : order) {
      if (v.time != t || !v.is_observation()) continue;
      if (unit(rng) < scm.p_one(v, h, a)) h |= std::uint64_t{1} << (t * m + v.index);
    }
    return h;
  };
  for (long n = 0; n < *opt.n_samples; ++n) {
    std::uint64_t h = draw_step(0, 0, 0);
    std::vector<std::uint64_t> prefix;
    for (int t = 0; t < T; ++t) {
      const int a = act(rng);
      const std::uint64_t h2 = draw_step(t + 1, h, a);
      prefix.push_back(state_key(nodes[t], m, h));
      record(t, h, prefix, a, h2, 1.0);
      prefix.push_back(static_cast<std::uint64_t>(a));
      h = h2;
    }
  }
  return compare_tables(tab, opt, true);
}

LemmaCase lemma_case(const FullTimeGraph& g, int t, const NodeId& x) {
  if (!g.contains(x) || !x.is_observation() || x.time > t || t < 0 || t > g.horizon())
    throw std::domain_error(to_string(x) + " is not an observation at time <= " + std::to_string(t));
  if (g.parents(NodeId::reward(t)).contains(x)) return LemmaCase::RewardParent;
  if (t < g.horizon()) {
    const auto seq = construct_minimal_states(g);
    NodeSet now;
    for (const auto& v : seq.states[t + 1])
      if (v.time == t + 1) now.insert(v);
    for (const auto& y : same_time_closure(g, now, t + 1))
      if (g.parents(y).contains(x)) return LemmaCase::NextStateParent;
  }
  throw std::domain_error(to_string(x) + " neither feeds R_" + std::to_string(t) +
                          " nor a time-" + std::to_string(t + 1) + " member of the next state's closure");
}

namespace {

// Shortest directed path from y to a reward node through observations.
std::vector<NodeId> path_to_reward(const FullTimeGraph& g, const NodeId& y) {
  std::map<NodeId, NodeId> prev;
  std::deque<NodeId> frontier{y};
  prev.emplace(y, y);
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop_front();
    if (u.is_reward()) {
      std::vector<NodeId> path{u};
      for (NodeId v = u; !(v == y);) path.push_back(v = prev.at(v));
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (const auto& c : g.children(u))
      if (!c.is_action() && prev.emplace(c, u).second) frontier.push_back(c);
  }
  return {};
}

void set_indicator_equal(Cpt& c, const NodeId& x, int arity) {
  const auto ix = std::find(c.parents.begin(), c.parents.end(), x) - c.parents.begin();
  const auto ia = std::find_if(c.parents.begin(), c.parents.end(), [](const NodeId& p) { return p.is_action(); }) -
                  c.parents.begin();
  if (ia == static_cast<std::ptrdiff_t>(c.parents.size()))
    throw std::domain_error(to_string(c.node) + " has no action parent to gate");
  for (std::size_t row = 0; row < c.p_one.size(); ++row)
    c.p_one[row] = digit(c.parents, arity, row, ix) == digit(c.parents, arity, row, ia) ? 1.0 : 0.0;
}

void set_copy(Cpt& c, const NodeId& src, int arity) {
  const auto is = std::find(c.parents.begin(), c.parents.end(), src) - c.parents.begin();
  for (std::size_t row = 0; row < c.p_one.size(); ++row)
    c.p_one[row] = static_cast<double>(digit(c.parents, arity, row, is));
}

}  // namespace

TabularScm lemma_counterexample(const FullTimeGraph& g, int t, const NodeId& x, double p, int action_arity) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("lemma instance needs p in (0, 1)");
  const LemmaCase kind = lemma_case(g, t, x);
  std::map<NodeId, Cpt> cpts;
  for (const auto& v : g.nodes())
    if (!v.is_action()) cpts.emplace(v, zero_cpt(g, v, action_arity));
  for (auto& q : cpts.at(x).p_one) q = p;

  if (kind == LemmaCase::RewardParent) {
    set_indicator_equal(cpts.at(NodeId::reward(t)), x, action_arity);
  } else {
    const auto seq = construct_minimal_states(g);
    NodeSet now;
    for (const auto& v : seq.states[t + 1])
      if (v.time == t + 1) now.insert(v);
    std::vector<NodeId> path;
    for (const auto& y : same_time_closure(g, now, t + 1))
      if (g.parents(y).contains(x) && !(path = path_to_reward(g, y)).empty()) break;
    if (path.empty()) throw std::domain_error("no directed path from the children of " + to_string(x) + " to a reward");
    set_indicator_equal(cpts.at(path.front()), x, action_arity);
    for (std::size_t k = 1; k < path.size(); ++k) set_copy(cpts.at(path[k]), path[k - 1], action_arity);
  }
  std::vector<Cpt> out;
  for (auto& [v, c] : cpts) out.push_back(std::move(c));
  return TabularScm(g, action_arity, std::move(out));
}

StateSequence without_node(const FullTimeGraph& g, const StateSequence& s, int t, const NodeId& x) {
  auto states = s.states;
  if (t < 0 || t >= static_cast<int>(states.size()) || !states[t].erase(x))
    throw std::domain_error(to_string(x) + " is not in S_" + std::to_string(t));
  return with_closures(g, std::move(states));
}

std::vector<DeletionCheck> single_point_deletions(const FullTimeGraph& g, double p) {
  const auto s = construct_minimal_states(g);
  std::vector<DeletionCheck> out;
  for (int t = 0; t <= g.horizon(); ++t)
    for (const auto& v : s.states[t]) {
      DeletionCheck d;
      d.t = t;
      d.node = v;
      const auto reduced = without_node(g, s, t, v);
      d.invalid = !check_validity(g, reduced).all_passed();
      try {
        const auto scm = lemma_counterexample(g, t, v, p);
        d.gap = exact_q(scm, s).value(0) - exact_q(scm, reduced).value(0);
      } catch (const std::domain_error&) {
        // carried-only member
      }
      out.push_back(d);
    }
  return out;
}

}  // namespace mose
