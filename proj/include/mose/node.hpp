#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace mose {

enum class NodeKind : std::uint8_t { Observation = 0, Action = 1, Reward = 2 };

/// Identity of a variable in a full time graph. Action and reward nodes carry
/// index 0; there is one of each per time step.
struct NodeId {
  NodeKind kind = NodeKind::Observation;
  int time = 0;
  int index = 0;

  static constexpr NodeId obs(int t, int i) { return {NodeKind::Observation, t, i}; }
  static constexpr NodeId action(int t) { return {NodeKind::Action, t, 0}; }
  static constexpr NodeId reward(int t) { return {NodeKind::Reward, t, 0}; }

  bool is_observation() const { return kind == NodeKind::Observation; }
  bool is_action() const { return kind == NodeKind::Action; }
  bool is_reward() const { return kind == NodeKind::Reward; }

  // Canonical order: (time, kind, index).
  friend constexpr auto operator<=>(const NodeId& a, const NodeId& b) {
    if (auto c = a.time <=> b.time; c != 0) return c;
    if (auto c = a.kind <=> b.kind; c != 0) return c;
    return a.index <=> b.index;
  }
  friend constexpr bool operator==(const NodeId&, const NodeId&) = default;
};

using NodeSet = std::set<NodeId>;

struct Edge {
  NodeId from;
  NodeId to;
  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

/// Short human-readable form, e.g. "x3@5", "a@2", "r@0".
std::string to_string(const NodeId& v);
std::string to_string(const NodeSet& s);

char kind_code(NodeKind k);
NodeKind kind_from_code(const std::string& code);

NodeSet set_union(const NodeSet& a, const NodeSet& b);
NodeSet set_difference(const NodeSet& a, const NodeSet& b);
NodeSet set_intersection(const NodeSet& a, const NodeSet& b);
bool is_subset(const NodeSet& a, const NodeSet& b);

}  // namespace mose

template <>
struct std::hash<mose::NodeId> {
  std::size_t operator()(const mose::NodeId& v) const noexcept {
    return (static_cast<std::size_t>(v.time) << 20) ^ (static_cast<std::size_t>(v.kind) << 16) ^
           static_cast<std::size_t>(v.index);
  }
};
