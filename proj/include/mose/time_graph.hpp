#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mose/node.hpp"

namespace mose {

/// Lag-specific DAG over observation, action and reward nodes for t in [0, T].
///
/// Immutable once built. The constructor rejects any edge list that breaks
/// the structural invariants (see `structural_violations`) with
/// std::domain_error, so every instance in circulation is valid.
class FullTimeGraph {
 public:
  FullTimeGraph(int horizon, int vars_per_step, int order, std::vector<Edge> edges);

  int horizon() const { return horizon_; }
  int vars_per_step() const { return vars_per_step_; }
  int order() const { return order_; }

  /// Edges in canonical (from, to) order, without duplicates.
  const std::vector<Edge>& edges() const { return edges_; }

  bool contains(const NodeId& v) const;
  std::size_t node_count() const { return parents_.size(); }
  std::vector<NodeId> nodes() const;

  const NodeSet& parents(const NodeId& v) const;
  const NodeSet& children(const NodeId& v) const;

  /// Strict ancestors: every u with a directed path u -> ... -> v of length >= 1.
  NodeSet ancestors(const NodeId& v) const;
  NodeSet descendants(const NodeId& v) const;

  /// Nodes ordered so that parents precede children; ties broken canonically.
  const std::vector<NodeId>& topological_order() const { return topo_; }

  NodeSet observations_at(int t) const;

  /// Dense position in [0, node_count()), stable for a given (T, m).
  int dense_index(const NodeId& v) const;
  NodeId node_at(int dense) const;

 private:
  void require(const NodeId& v) const;

  int horizon_;
  int vars_per_step_;
  int order_;
  std::vector<Edge> edges_;
  std::vector<NodeSet> parents_;
  std::vector<NodeSet> children_;
  std::vector<NodeId> topo_;
};

/// All invariant violations of a candidate edge list, in canonical order.
/// An empty result means the list describes a valid full time graph.
std::vector<std::string> structural_violations(int horizon, int vars_per_step, int order,
                                               const std::vector<Edge>& edges);

/// Re-checks a constructed graph. Always empty for graphs built through the
/// constructor; kept as the test-facing audit routine.
std::vector<std::string> validate(const FullTimeGraph& g);

/// d-separation of `a` and `b` given `z`, by the reachability sweep over
/// (node, direction) pairs. Throws std::domain_error if the sets overlap or
/// reference unknown nodes.
bool d_separated(const FullTimeGraph& g, const NodeSet& a, const NodeSet& b, const NodeSet& z);

/// The three-step example graph with variables L, M, N, W, X, Y per step
/// (indices 0..5). Each step holds L->W, M->X, N->X, N->Y, W->X, X->Y and
/// W, X, Y -> R; across steps Y_t -> W_{t+1}, L_t -> L_{t+1}, N_0 -> N_2,
/// and A_t feeds R_t and every observation at t+1.
FullTimeGraph example_graph();

namespace example {
inline constexpr int L = 0, M = 1, N = 2, W = 3, X = 4, Y = 5;
}

}  // namespace mose
