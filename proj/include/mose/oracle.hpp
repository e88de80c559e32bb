#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mose/graph_io.hpp"
#include "mose/state.hpp"

namespace mose {

/// Raised when a tabular instance is too large to enumerate.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observation histories are bit-packed, bit t*m + i holding X_t^i.
inline constexpr int kMaxObservationBits = 20;

/// P(v = 1 | parents) for one binary observation or reward node. Rows are
/// mixed-radix over `parents` in canonical order, first parent least
/// significant; observations have radix 2, the action has the action arity.
struct Cpt {
  NodeId node;
  std::vector<NodeId> parents;
  std::vector<double> p_one;
};

class TabularScm {
 public:
  /// Throws std::domain_error when a CPT is missing, its parents differ from
  /// the graph, a row has the wrong length or leaves [0, 1], and
  /// CapacityError when the observation history exceeds kMaxObservationBits.
  TabularScm(FullTimeGraph g, int action_arity, std::vector<Cpt> cpts);

  const FullTimeGraph& graph() const { return g_; }
  int action_arity() const { return arity_; }
  const std::vector<Cpt>& cpts() const { return cpts_; }
  const Cpt& cpt(const NodeId& v) const;

  /// P(v = 1) given packed observation history and the value of the action
  /// parent (A_{t-1} for X_t, A_t for R_t). Bits beyond v's parents are ignored.
  double p_one(const NodeId& v, std::uint64_t history, int action) const;

  /// P(X_{t+1} = next | history up to t, A_t = a); `next` packs X_{t+1}^0.. in its low bits.
  double transition(int t, std::uint64_t history, int a, std::uint32_t next) const;
  /// P(X_0 = x0).
  double initial(std::uint32_t x0) const;

 private:
  struct Slot {
    bool action;
    int bit;  // history bit for observations
    std::size_t stride;
  };
  FullTimeGraph g_;
  int arity_;
  std::vector<Cpt> cpts_;
  std::vector<int> cpt_of_dense_;  // dense node index -> position in cpts_, or -1
  std::vector<std::vector<Slot>> slots_;
};

/// Independent uniform(lo, hi) CPT entries for observations, uniform(0, 1) for rewards.
TabularScm random_tabular_scm(const FullTimeGraph& g, int action_arity, std::uint64_t seed, double lo = 0.1,
                              double hi = 0.9);

Json tabular_scm_to_json(const TabularScm& scm);
TabularScm tabular_scm_from_json(const Json& j);

/// State-independent behavior policy over actions; empty means uniform.
using BehaviorPolicy = std::vector<double>;

/// Forward marginals P(X_0..X_t = h) with A_0..A_{t-1} drawn from the policy.
std::vector<std::vector<double>> history_distributions(const TabularScm& scm, const BehaviorPolicy& pi = {});

/// Packs the values of `nodes` (canonical order, first node lowest bit).
std::uint64_t state_key(const std::vector<NodeId>& nodes, int vars_per_step, std::uint64_t history);

struct QTable {
  std::vector<std::vector<NodeId>> state_nodes;
  std::vector<std::map<std::uint64_t, std::vector<double>>> q;  // per t: state value -> Q(s, .)
  std::vector<std::map<std::uint64_t, double>> mass;            // per t: P(S_t = s)

  /// E[max_a Q_t(S_t, a)].
  double value(int t) const;
  const std::vector<double>& at(int t, std::uint64_t history, int vars_per_step) const;
};

/// Backward induction over the given representation. Transitions of the
/// representation are the behavior-policy conditionals of the exact joint, so
/// non-Markov inputs get the averaged values a learner on them would see.
QTable exact_q(const TabularScm& scm, const StateSequence& states, const BehaviorPolicy& pi = {});

/// Lowest action index among those within `tol` of the maximum.
int greedy_action(const std::vector<double>& q, double tol = 1e-9);

struct QComparison {
  double max_abs_diff = 0.0;
  int argmax_mismatches = 0;
  long reachable = 0;  // (t, history) pairs compared
};

/// Compares two tables at every reachable history of the SCM.
QComparison compare_q(const TabularScm& scm, const QTable& a, const QTable& b, double tol = 1e-9);

struct MarkovResult {
  bool passed = true;
  double max_deviation = 0.0;
  int worst_t = -1;
  long histories_checked = 0;
  long histories_skipped = 0;  // sampling mode: too few visits
};

struct MarkovOptions {
  std::optional<long> n_samples;  // unset means exact enumeration
  BehaviorPolicy behavior;
  double tolerance = 1e-9;
  long min_visits = 200;  // sampling mode only
  std::uint64_t seed = 0;
};

/// Compares P(S_{t+1} | S_0, A_0, .., S_t, A_t) with P(S_{t+1} | S_t, A_t).
MarkovResult test_markov(const TabularScm& scm, const StateSequence& states, const MarkovOptions& opt = {});

/// How the excluded node feeds the objective in a lemma instance.
enum class LemmaCase { RewardParent, NextStateParent };

/// Instance in which binary x ~ Bernoulli(p) decides which action pays 1:
/// either R_t = I(A_t = x), or Y = I(A_t = x) for a time t+1 member Y of the
/// closure of S_{t+1} that x feeds, copied along a directed path to a reward.
/// Every other node is constant 0. S comes from the backward construction.
/// Throws std::domain_error if x is not a time <= t observation in S_t that
/// is a reward parent or a past parent of that closure, or if p is not in (0, 1).
TabularScm lemma_counterexample(const FullTimeGraph& g, int t, const NodeId& x, double p, int action_arity = 2);
LemmaCase lemma_case(const FullTimeGraph& g, int t, const NodeId& x);

/// Copy of `s` with x removed from S_t and closures recomputed.
StateSequence without_node(const FullTimeGraph& g, const StateSequence& s, int t, const NodeId& x);

struct DeletionCheck {
  int t = 0;
  NodeId node;
  bool invalid = false;        // check_validity rejects the reduced sequence
  std::optional<double> gap;   // V*_0 loss on the lemma instance, when one exists
};

/// Every single-node deletion from the constructed states, each checked for
/// validity and, where a lemma instance exists, for its exact value gap.
std::vector<DeletionCheck> single_point_deletions(const FullTimeGraph& g, double p);

}  // namespace mose
