#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mose/graph_io.hpp"
#include "mose/time_graph.hpp"

namespace mose {

/// Per-step observation subsets S_t plus the auxiliary same-time sets C_t that
/// complete S_t to its same-time closure.
struct StateSequence {
  std::vector<NodeSet> states;
  std::vector<NodeSet> closures;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
  friend bool operator==(const StateSequence&, const StateSequence&) = default;
};

/// Smallest superset of `z` closed under same-time observation parents.
/// Every member of `z` must sit at time `t`.
NodeSet same_time_closure(const FullTimeGraph& g, const NodeSet& z, int t);

/// Observation parents of R_t.
NodeSet reward_parents(const FullTimeGraph& g, int t);

/// Backward construction of the minimal Markovian state sequence.
StateSequence construct_minimal_states(const FullTimeGraph& g);

/// S_t = every observation in [max(t - w, 0), t].
StateSequence window_states(const FullTimeGraph& g, int w);

/// Window of the graph's declared order.
inline StateSequence full_window_states(const FullTimeGraph& g) { return window_states(g, g.order()); }

/// Attach C_t = closure(S_t at time t) \ S_t to arbitrary states.
StateSequence with_closures(const FullTimeGraph& g, std::vector<NodeSet> states);

enum class Condition : int {
  RewardParentInclusion = 0,
  NextStateParentInclusion = 1,
  NoAncestralReentry = 2,
  Persistence = 3,
};
inline constexpr std::array<Condition, 4> kAllConditions = {
    Condition::RewardParentInclusion, Condition::NextStateParentInclusion, Condition::NoAncestralReentry,
    Condition::Persistence};

std::string condition_name(Condition c);

struct Witness {
  NodeId node;
  std::vector<int> times;  // the time steps the failing check compared
};

struct ConditionResult {
  bool passed = true;
  std::optional<Witness> witness;
  std::string detail;
};

struct ValidityReport {
  std::array<ConditionResult, 4> conditions;

  bool all_passed() const;
  const ConditionResult& operator[](Condition c) const { return conditions[static_cast<int>(c)]; }
};

/// Graphical validity check of a state sequence. The first failure under
/// canonical order is reported as witness for each condition.
///
/// Condition 2 treats a member of S_{t+1} older than t+1 as its own past
/// parent (it must stay in S_t); condition 3 compares every later step with
/// every earlier one. Throws std::domain_error if the sequence length does
/// not match the horizon or S_t holds anything but observations at times <= t.
ValidityReport check_validity(const FullTimeGraph& g, const std::vector<NodeSet>& states);
inline ValidityReport check_validity(const FullTimeGraph& g, const StateSequence& s) {
  return check_validity(g, s.states);
}

/// Graph-level Markov check: the time-(t+1) part of S_{t+1}, closed under
/// same-time parents, must be d-separated from every other non-reward node at
/// times <= t given S_t and A_t. Returns the first t that fails.
std::optional<int> markov_violation(const FullTimeGraph& g, const StateSequence& s);

struct SizeStats {
  double mean = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::size_t samples = 0;
};

/// Average |S_t| over t of one sequence.
double mean_state_size(const StateSequence& s);

/// Mean and normal-approximation 95% interval over per-graph means.
SizeStats size_stats_from_means(const std::vector<double>& per_graph_means);

/// Runs the backward construction on every graph. Throws on an empty list.
SizeStats state_size_stats(const std::vector<FullTimeGraph>& graphs);

Json state_sequence_to_json(const StateSequence& s);
StateSequence state_sequence_from_json(const Json& j);
Json validity_report_to_json(const ValidityReport& r);
std::string format_validity_table(const ValidityReport& r);

}  // namespace mose
