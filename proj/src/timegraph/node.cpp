#include "mose/node.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>

namespace mose {

char kind_code(NodeKind k) {
  switch (k) {
    case NodeKind::Observation: return 'x';
    case NodeKind::Action: return 'a';
    case NodeKind::Reward: return 'r';
  }
  return '?';
}

NodeKind kind_from_code(const std::string& code) {
  if (code == "x") return NodeKind::Observation;
  if (code == "a") return NodeKind::Action;
  if (code == "r") return NodeKind::Reward;
  throw std::domain_error("unknown node kind code '" + code + "'");
}

std::string to_string(const NodeId& v) {
  std::string s(1, kind_code(v.kind));
  if (v.is_observation()) s += std::to_string(v.index);
  return s + "@" + std::to_string(v.time);
}

std::string to_string(const NodeSet& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& v : s) {
    if (!first) out += ", ";
    out += to_string(v);
    first = false;
  }
  return out + "}";
}

NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out = a;
  out.insert(b.begin(), b.end());
  return out;
}

NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

NodeSet set_intersection(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

bool is_subset(const NodeSet& a, const NodeSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace mose
