#include "mose/time_graph.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace mose {
namespace {

bool in_range(const NodeId& v, int horizon, int vars_per_step) {
  if (v.time < 0 || v.time > horizon) return false;
  if (v.is_observation()) return v.index >= 0 && v.index < vars_per_step;
  return v.index == 0;
}

std::string edge_str(const Edge& e) { return to_string(e.from) + " -> " + to_string(e.to); }

// Kahn's algorithm; returns fewer than n nodes when a cycle exists.
std::vector<int> kahn_order(const std::vector<NodeSet>& parents, const std::vector<NodeSet>& children,
                            const auto& index_of, const auto& node_of) {
  const int n = static_cast<int>(parents.size());
  std::vector<int> indegree(n);
  std::set<NodeId> ready;
  for (int i = 0; i < n; ++i) {
    indegree[i] = static_cast<int>(parents[i].size());
    if (indegree[i] == 0) ready.insert(node_of(i));
  }
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const NodeId v = *ready.begin();
    ready.erase(ready.begin());
    const int i = index_of(v);
    order.push_back(i);
    for (const auto& c : children[i]) {
      if (--indegree[index_of(c)] == 0) ready.insert(c);
    }
  }
  return order;
}

}  // namespace

std::vector<std::string> structural_violations(int horizon, int vars_per_step, int order,
                                               const std::vector<Edge>& edges) {
  std::vector<std::string> out;
  if (horizon < 0) out.push_back("horizon must be >= 0");
  if (vars_per_step < 1) out.push_back("vars_per_step must be >= 1");
  if (order < 0) out.push_back("order must be >= 0");
  if (!out.empty()) return out;

  std::vector<Edge> sorted = edges;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (const auto& e : sorted) {
    const auto& u = e.from;
    const auto& v = e.to;
    if (!in_range(u, horizon, vars_per_step) || !in_range(v, horizon, vars_per_step)) {
      out.push_back("unknown node in edge " + edge_str(e));
      continue;
    }
    if (u == v) {
      out.push_back("self loop " + edge_str(e));
      continue;
    }
    if (u.time > v.time) out.push_back("edge points backwards in time: " + edge_str(e));
    if ((v.is_observation() || v.is_reward()) && u.time < v.time - order)
      out.push_back("lag exceeds order: " + edge_str(e));
    if (u.is_action()) {
      const bool ok = (v.is_observation() && v.time == u.time + 1) || (v.is_reward() && v.time == u.time);
      if (!ok) out.push_back("action may only feed X_{t+1} or R_t: " + edge_str(e));
    }
    if (u.is_reward()) out.push_back("reward nodes have no outgoing edges: " + edge_str(e));
    if (v.is_action()) out.push_back("action nodes are decisions and take no parents: " + edge_str(e));
  }
  if (!out.empty()) return out;

  // Acyclicity. Only same-time observation edges can close a cycle once the
  // temporal checks pass, but the general check is cheap.
  const int stride = vars_per_step + 2;
  const int n = (horizon + 1) * stride;
  auto index_of = [&](const NodeId& v) {
    const int slot = v.is_observation() ? v.index : (v.is_action() ? vars_per_step : vars_per_step + 1);
    return v.time * stride + slot;
  };
  auto node_of = [&](int i) {
    const int t = i / stride, slot = i % stride;
    if (slot < vars_per_step) return NodeId::obs(t, slot);
    return slot == vars_per_step ? NodeId::action(t) : NodeId::reward(t);
  };
  std::vector<NodeSet> par(n), chi(n);
  for (const auto& e : sorted) {
    par[index_of(e.to)].insert(e.from);
    chi[index_of(e.from)].insert(e.to);
  }
  if (static_cast<int>(kahn_order(par, chi, index_of, node_of).size()) != n)
    out.push_back("graph contains a directed cycle");
  return out;
}

FullTimeGraph::FullTimeGraph(int horizon, int vars_per_step, int order, std::vector<Edge> edges)
    : horizon_(horizon), vars_per_step_(vars_per_step), order_(order) {
  auto violations = structural_violations(horizon, vars_per_step, order, edges);
  if (!violations.empty()) {
    std::string msg = "invalid full time graph: " + violations.front();
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw std::domain_error(msg);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  const int n = (horizon_ + 1) * (vars_per_step_ + 2);
  parents_.assign(n, {});
  children_.assign(n, {});
  for (const auto& e : edges_) {
    parents_[dense_index(e.to)].insert(e.from);
    children_[dense_index(e.from)].insert(e.to);
  }
  auto idx = [this](const NodeId& v) { return dense_index(v); };
  auto nod = [this](int i) { return node_at(i); };
  for (int i : kahn_order(parents_, children_, idx, nod)) topo_.push_back(node_at(i));
}

int FullTimeGraph::dense_index(const NodeId& v) const {
  const int slot = v.is_observation() ? v.index : (v.is_action() ? vars_per_step_ : vars_per_step_ + 1);
  return v.time * (vars_per_step_ + 2) + slot;
}

NodeId FullTimeGraph::node_at(int dense) const {
  const int stride = vars_per_step_ + 2;
  const int t = dense / stride, slot = dense % stride;
  if (slot < vars_per_step_) return NodeId::obs(t, slot);
  return slot == vars_per_step_ ? NodeId::action(t) : NodeId::reward(t);
}

bool FullTimeGraph::contains(const NodeId& v) const { return in_range(v, horizon_, vars_per_step_); }

void FullTimeGraph::require(const NodeId& v) const {
  if (!contains(v)) throw std::domain_error("node " + to_string(v) + " is not part of the graph");
}

std::vector<NodeId> FullTimeGraph::nodes() const {
  std::vector<NodeId> out;
  out.reserve(node_count());
  for (int i = 0; i < static_cast<int>(node_count()); ++i) out.push_back(node_at(i));
  return out;
}

const NodeSet& FullTimeGraph::parents(const NodeId& v) const {
  require(v);
  return parents_[dense_index(v)];
}

const NodeSet& FullTimeGraph::children(const NodeId& v) const {
  require(v);
  return children_[dense_index(v)];
}

NodeSet FullTimeGraph::ancestors(const NodeId& v) const {
  require(v);
  NodeSet out;
  std::deque<NodeId> frontier(parents_[dense_index(v)].begin(), parents_[dense_index(v)].end());
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop_front();
    if (!out.insert(u).second) continue;
    for (const auto& p : parents_[dense_index(u)]) frontier.push_back(p);
  }
  return out;
}

NodeSet FullTimeGraph::descendants(const NodeId& v) const {
  require(v);
  NodeSet out;
  std::deque<NodeId> frontier(children_[dense_index(v)].begin(), children_[dense_index(v)].end());
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop_front();
    if (!out.insert(u).second) continue;
    for (const auto& c : children_[dense_index(u)]) frontier.push_back(c);
  }
  return out;
}

NodeSet FullTimeGraph::observations_at(int t) const {
  NodeSet out;
  if (t < 0 || t > horizon_) return out;
  for (int i = 0; i < vars_per_step_; ++i) out.insert(NodeId::obs(t, i));
  return out;
}

std::vector<std::string> validate(const FullTimeGraph& g) {
  return structural_violations(g.horizon(), g.vars_per_step(), g.order(), g.edges());
}

bool d_separated(const FullTimeGraph& g, const NodeSet& a, const NodeSet& b, const NodeSet& z) {
  for (const NodeSet* s : {&a, &b, &z})
    for (const auto& v : *s)
      if (!g.contains(v)) throw std::domain_error("d-separation query uses unknown node " + to_string(v));
  if (!set_intersection(a, b).empty() || !set_intersection(a, z).empty() || !set_intersection(b, z).empty())
    throw std::domain_error("d-separation query sets must be pairwise disjoint");

  const int n = static_cast<int>(g.node_count());
  std::vector<char> in_z(n, 0), z_or_anc(n, 0), in_b(n, 0);
  for (const auto& v : z) in_z[g.dense_index(v)] = 1;
  for (const auto& v : b) in_b[g.dense_index(v)] = 1;

  // Nodes that are in z or have a descendant in z: colliders there are open.
  std::deque<NodeId> frontier(z.begin(), z.end());
  while (!frontier.empty()) {
    const NodeId v = frontier.front();
    frontier.pop_front();
    auto& flag = z_or_anc[g.dense_index(v)];
    if (flag) continue;
    flag = 1;
    for (const auto& p : g.parents(v)) frontier.push_back(p);
  }

  // Direction: 0 = arrived from a child (moving up), 1 = arrived from a parent.
  std::vector<char> visited(2 * static_cast<std::size_t>(n), 0);
  std::deque<std::pair<NodeId, int>> queue;
  for (const auto& v : a) queue.emplace_back(v, 0);
  while (!queue.empty()) {
    const auto [v, dir] = queue.front();
    queue.pop_front();
    const int i = g.dense_index(v);
    auto& seen = visited[2 * static_cast<std::size_t>(i) + dir];
    if (seen) continue;
    seen = 1;
    if (!in_z[i] && in_b[i]) return false;
    if (dir == 0) {
      if (in_z[i]) continue;
      for (const auto& p : g.parents(v)) queue.emplace_back(p, 0);
      for (const auto& c : g.children(v)) queue.emplace_back(c, 1);
    } else {
      if (!in_z[i])
        for (const auto& c : g.children(v)) queue.emplace_back(c, 1);
      if (z_or_anc[i])
        for (const auto& p : g.parents(v)) queue.emplace_back(p, 0);
    }
  }
  return true;
}

FullTimeGraph example_graph() {
  using namespace example;
  constexpr int kHorizon = 2;
  std::vector<Edge> edges;
  auto x = [](int t, int i) { return NodeId::obs(t, i); };
  for (int t = 0; t <= kHorizon; ++t) {
    edges.push_back({x(t, L), x(t, W)});
    edges.push_back({x(t, M), x(t, X)});
    edges.push_back({x(t, N), x(t, X)});
    edges.push_back({x(t, N), x(t, Y)});
    edges.push_back({x(t, W), x(t, X)});
    edges.push_back({x(t, X), x(t, Y)});
    for (int i : {W, X, Y}) edges.push_back({x(t, i), NodeId::reward(t)});
    edges.push_back({NodeId::action(t), NodeId::reward(t)});
    if (t < kHorizon) {
      edges.push_back({x(t, Y), x(t + 1, W)});
      edges.push_back({x(t, L), x(t + 1, L)});
      for (int i = 0; i < 6; ++i) edges.push_back({NodeId::action(t), x(t + 1, i)});
    }
  }
  edges.push_back({x(0, N), x(2, N)});
  return FullTimeGraph(kHorizon, 6, 2, std::move(edges));
}

}  // namespace mose
