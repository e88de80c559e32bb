#include "mose/state.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mose {
namespace {

// Strict-ancestor bitsets for every dense node index.
class AncestorTable {
 public:
  explicit AncestorTable(const FullTimeGraph& g) : g_(g), words_((g.node_count() + 63) / 64) {
    bits_.assign(g.node_count() * words_, 0);
    for (const auto& v : g.topological_order()) {
      auto* row = &bits_[g.dense_index(v) * words_];
      for (const auto& p : g.parents(v)) {
        const int pi = g.dense_index(p);
        const auto* prow = &bits_[pi * words_];
        for (std::size_t w = 0; w < words_; ++w) row[w] |= prow[w];
        row[pi / 64] |= std::uint64_t{1} << (pi % 64);
      }
    }
  }

  bool is_ancestor(const NodeId& u, const NodeId& v) const {
    const int ui = g_.dense_index(u);
    return (bits_[g_.dense_index(v) * words_ + ui / 64] >> (ui % 64)) & 1U;
  }

 private:
  const FullTimeGraph& g_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

NodeSet at_time(const NodeSet& s, int t) {
  NodeSet out;
  for (const auto& v : s)
    if (v.time == t) out.insert(v);
  return out;
}

void check_shape(const FullTimeGraph& g, const std::vector<NodeSet>& states) {
  if (static_cast<int>(states.size()) != g.horizon() + 1)
    throw std::domain_error("state sequence has " + std::to_string(states.size()) + " steps, graph horizon needs " +
                            std::to_string(g.horizon() + 1));
  for (int t = 0; t <= g.horizon(); ++t) {
    for (const auto& v : states[t]) {
      if (!g.contains(v) || !v.is_observation() || v.time > t)
        throw std::domain_error("S_" + std::to_string(t) + " may only hold observations at times <= t, got " +
                                to_string(v));
    }
  }
}

ConditionResult fail(const NodeId& v, std::vector<int> times, std::string detail) {
  return ConditionResult{false, Witness{v, std::move(times)}, std::move(detail)};
}

}  // namespace

NodeSet same_time_closure(const FullTimeGraph& g, const NodeSet& z, int t) {
  for (const auto& v : z)
    if (v.time != t || !g.contains(v))
      throw std::domain_error("same-time closure at t=" + std::to_string(t) + " got " + to_string(v));
  NodeSet out = z;
  std::deque<NodeId> frontier(z.begin(), z.end());
  while (!frontier.empty()) {
    const NodeId y = frontier.front();
    frontier.pop_front();
    for (const auto& p : g.parents(y))
      if (p.is_observation() && p.time == t && out.insert(p).second) frontier.push_back(p);
  }
  return out;
}

NodeSet reward_parents(const FullTimeGraph& g, int t) {
  NodeSet out;
  for (const auto& p : g.parents(NodeId::reward(t)))
    if (p.is_observation()) out.insert(p);
  return out;
}

StateSequence construct_minimal_states(const FullTimeGraph& g) {
  const int T = g.horizon();
  StateSequence seq;
  seq.states.assign(T + 1, {});
  seq.closures.assign(T + 1, {});
  NodeSet next_state, next_closure;  // S_{T+1} = C_{T+1} = {}
  for (int t = T; t >= 0; --t) {
    NodeSet s;
    for (const auto& v : next_state)
      if (v.time <= t) s.insert(v);
    for (const NodeSet* src : {&next_state, &next_closure}) {
      for (const auto& y : *src) {
        if (y.time != t + 1) continue;
        for (const auto& p : g.parents(y))
          if (p.is_observation() && p.time <= t) s.insert(p);
      }
    }
    const NodeSet rp = reward_parents(g, t);
    s.insert(rp.begin(), rp.end());

    NodeSet c = set_difference(same_time_closure(g, at_time(s, t), t), s);
    seq.states[t] = s;
    seq.closures[t] = c;
    next_state = std::move(s);
    next_closure = std::move(c);
  }
  return seq;
}

StateSequence window_states(const FullTimeGraph& g, int w) {
  if (w < 0) throw std::domain_error("window length must be >= 0");
  std::vector<NodeSet> states(g.horizon() + 1);
  for (int t = 0; t <= g.horizon(); ++t)
    for (int u = std::max(t - w, 0); u <= t; ++u) {
      const NodeSet xs = g.observations_at(u);
      states[t].insert(xs.begin(), xs.end());
    }
  return with_closures(g, std::move(states));
}

StateSequence with_closures(const FullTimeGraph& g, std::vector<NodeSet> states) {
  check_shape(g, states);
  StateSequence seq;
  seq.closures.resize(states.size());
  for (int t = 0; t < static_cast<int>(states.size()); ++t)
    seq.closures[t] = set_difference(same_time_closure(g, at_time(states[t], t), t), states[t]);
  seq.states = std::move(states);
  return seq;
}

std::string condition_name(Condition c) {
  switch (c) {
    case Condition::RewardParentInclusion: return "reward parent inclusion";
    case Condition::NextStateParentInclusion: return "inclusion of extended next state parents";
    case Condition::NoAncestralReentry: return "no ancestral re-entry";
    case Condition::Persistence: return "persistence of included variables";
  }
  return "?";
}

bool ValidityReport::all_passed() const {
  for (const auto& c : conditions)
    if (!c.passed) return false;
  return true;
}

ValidityReport check_validity(const FullTimeGraph& g, const std::vector<NodeSet>& states) {
  check_shape(g, states);
  const int T = g.horizon();
  ValidityReport report;

  auto& c1 = report.conditions[static_cast<int>(Condition::RewardParentInclusion)];
  for (int t = 0; t <= T && c1.passed; ++t)
    for (const auto& p : reward_parents(g, t))
      if (!states[t].contains(p)) {
        c1 = fail(p, {t}, "parent " + to_string(p) + " of R_" + std::to_string(t) + " missing from S_" +
                              std::to_string(t));
        break;
      }

  auto& c2 = report.conditions[static_cast<int>(Condition::NextStateParentInclusion)];
  for (int t = 0; t < T && c2.passed; ++t) {
    const NodeSet& next = states[t + 1];
    NodeSet extended = same_time_closure(g, at_time(next, t + 1), t + 1);
    for (const auto& v : next)
      if (v.time <= t) extended.insert(v);
    for (const auto& x : extended) {
      std::optional<NodeId> missing;
      if (x.time <= t) {
        if (!states[t].contains(x)) missing = x;
      } else {
        for (const auto& p : g.parents(x))
          if (p.is_observation() && p.time <= t && !states[t].contains(p)) {
            missing = p;
            break;
          }
      }
      if (missing) {
        c2 = fail(*missing, {t, t + 1},
                  to_string(*missing) + " is needed by the extended S_" + std::to_string(t + 1) + " (via " +
                      to_string(x) + ") but missing from S_" + std::to_string(t));
        break;
      }
    }
  }

  auto& c3 = report.conditions[static_cast<int>(Condition::NoAncestralReentry)];
  const AncestorTable anc(g);
  for (int early = 0; early <= T && c3.passed; ++early) {
    for (int late = early + 1; late <= T && c3.passed; ++late) {
      const NodeSet entered = set_difference(states[late], states[early]);
      const NodeSet dropped = set_difference(states[early], states[late]);
      for (const auto& e : entered) {
        for (const auto& d : dropped)
          if (anc.is_ancestor(e, d)) {
            c3 = fail(e, {early, late},
                      to_string(e) + " enters S_" + std::to_string(late) + " although it is an ancestor of " +
                          to_string(d) + ", dropped after S_" + std::to_string(early));
            break;
          }
        if (!c3.passed) break;
      }
    }
  }

  auto& c4 = report.conditions[static_cast<int>(Condition::Persistence)];
  std::map<NodeId, std::vector<int>> appearances;
  for (int t = 0; t <= T; ++t)
    for (const auto& v : states[t]) appearances[v].push_back(t);
  for (const auto& [v, times] : appearances) {
    for (std::size_t k = 1; k < times.size(); ++k)
      if (times[k] != times[k - 1] + 1) {
        c4 = fail(v, {times[k - 1], times[k - 1] + 1, times[k]},
                  to_string(v) + " is in S_" + std::to_string(times[k - 1]) + " and S_" + std::to_string(times[k]) +
                      " but not S_" + std::to_string(times[k - 1] + 1));
        break;
      }
    if (!c4.passed) break;
  }
  return report;
}

double mean_state_size(const StateSequence& s) {
  if (s.states.empty()) return 0.0;
  double total = 0.0;
  for (const auto& st : s.states) total += static_cast<double>(st.size());
  return total / static_cast<double>(s.states.size());
}

std::optional<int> markov_violation(const FullTimeGraph& g, const StateSequence& s) {
  if (s.horizon() != g.horizon()) throw std::domain_error("state sequence length differs from the horizon");
  for (int t = 0; t < g.horizon(); ++t) {
    NodeSet z = s.states[t];
    z.insert(NodeId::action(t));
    NodeSet now;
    for (const auto& v : s.states[t + 1])
      if (v.time == t + 1) now.insert(v);
    const NodeSet future = same_time_closure(g, now, t + 1);
    NodeSet past;
    for (const auto& v : g.nodes())
      if (v.time <= t && !v.is_reward() && !z.contains(v)) past.insert(v);
    if (future.empty() || past.empty()) continue;
    if (!d_separated(g, future, past, z)) return t;
  }
  return std::nullopt;
}

SizeStats size_stats_from_means(const std::vector<double>& per_graph_means) {
  if (per_graph_means.empty()) throw std::domain_error("state size statistics need at least one graph");
  const double n = static_cast<double>(per_graph_means.size());
  const double mean = std::accumulate(per_graph_means.begin(), per_graph_means.end(), 0.0) / n;
  double half = 0.0;
  if (per_graph_means.size() > 1) {
    double ss = 0.0;
    for (double x : per_graph_means) ss += (x - mean) * (x - mean);
    half = 1.959963984540054 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return {mean, mean - half, mean + half, per_graph_means.size()};
}

SizeStats state_size_stats(const std::vector<FullTimeGraph>& graphs) {
  std::vector<double> means;
  means.reserve(graphs.size());
  for (const auto& g : graphs) means.push_back(mean_state_size(construct_minimal_states(g)));
  return size_stats_from_means(means);
}

Json state_sequence_to_json(const StateSequence& s) {
  Json states = Json::array(), closures = Json::array();
  for (const auto& st : s.states) states.push_back(nodes_to_json(st));
  for (const auto& c : s.closures) closures.push_back(nodes_to_json(c));
  return Json{{"states", states}, {"closures", closures}};
}

StateSequence state_sequence_from_json(const Json& j) {
  StateSequence s;
  for (const auto& st : j.at("states")) s.states.push_back(nodes_from_json(st));
  if (j.contains("closures"))
    for (const auto& c : j.at("closures")) s.closures.push_back(nodes_from_json(c));
  return s;
}

Json validity_report_to_json(const ValidityReport& r) {
  Json out = Json::array();
  for (auto c : kAllConditions) {
    const auto& res = r[c];
    Json entry{{"condition", static_cast<int>(c) + 1}, {"name", condition_name(c)}, {"passed", res.passed}};
    if (res.witness) {
      entry["witness"] = {{"node", node_to_json(res.witness->node)}, {"times", res.witness->times}};
      entry["detail"] = res.detail;
    }
    out.push_back(entry);
  }
  return Json{{"all_passed", r.all_passed()}, {"conditions", out}};
}

std::string format_validity_table(const ValidityReport& r) {
  std::ostringstream os;
  for (auto c : kAllConditions) {
    const auto& res = r[c];
    os << "  [" << (res.passed ? "pass" : "FAIL") << "] " << static_cast<int>(c) + 1 << ". " << condition_name(c);
    if (res.witness) os << "  -- " << res.detail;
    os << "\n";
  }
  return os.str();
}

}  // namespace mose
