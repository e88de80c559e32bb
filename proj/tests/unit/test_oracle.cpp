#include <doctest.h>

#include <cmath>

#include "mose/generator.hpp"
#include "mose/oracle.hpp"

using namespace mose;

namespace {

NodeId x(int t, int i) { return NodeId::obs(t, i); }

FullTimeGraph small_graph(std::uint64_t seed, int T = 3) {
  const int m = 2 + static_cast<int>(seed % 2);
  return generate_random_graph({m, T, 1 + static_cast<int>(seed % 3 == 0), 0.35}, seed);
}

MarkovOptions sampled(long n, double tol, std::uint64_t seed) {
  MarkovOptions o;
  o.n_samples = n;
  o.tolerance = tol;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("tabular model invariants") {
  const FullTimeGraph g(1, 1, 1, {{x(0, 0), x(1, 0)}, {NodeId::action(0), x(1, 0)}, {x(1, 0), NodeId::reward(1)}});
  const auto scm = random_tabular_scm(g, 3, 1);
  CHECK(scm.cpt(x(1, 0)).p_one.size() == 6);
  for (const auto& c : scm.cpts())
    for (double p : c.p_one) CHECK((p >= 0.0 && p <= 1.0));

  auto cpts = scm.cpts();
  SUBCASE("wrong parent signature") {
    for (auto& c : cpts)
      if (c.node == x(1, 0)) c.parents.pop_back();
    CHECK_THROWS_AS(TabularScm(g, 3, cpts), std::domain_error);
  }
  SUBCASE("wrong row count") {
    cpts.back().p_one.push_back(0.5);
    CHECK_THROWS_AS(TabularScm(g, 3, cpts), std::domain_error);
  }
  SUBCASE("entry outside [0, 1]") {
    cpts[0].p_one[0] = 1.5;
    CHECK_THROWS_AS(TabularScm(g, 3, cpts), std::domain_error);
  }
  SUBCASE("missing CPT") {
    cpts.pop_back();
    CHECK_THROWS_AS(TabularScm(g, 3, cpts), std::domain_error);
  }
  SUBCASE("too large to enumerate") {
    const auto big = generate_random_graph({3, 6, 2, 0.2}, 3);
    CHECK_THROWS_AS(random_tabular_scm(big, 2, 0), CapacityError);
  }
  SUBCASE("history marginals sum to one") {
    const auto s = random_tabular_scm(small_graph(4), 2, 9);
    for (const auto& d : history_distributions(s)) {
      double total = 0.0;
      for (double p : d) total += p;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("terminal Q is the expected reward") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = small_graph(seed);
    const auto scm = random_tabular_scm(g, 2, seed + 100);
    const auto q = exact_q(scm, construct_minimal_states(g));
    const int T = g.horizon(), m = g.vars_per_step();
    const auto dist = history_distributions(scm);
    for (std::uint64_t h = 0; h < dist[T].size(); ++h) {
      if (dist[T][h] == 0.0) continue;
      for (int a = 0; a < 2; ++a) CHECK(q.at(T, h, m)[a] == doctest::Approx(scm.p_one(NodeId::reward(T), h, a)));
    }
  }
}

TEST_CASE("minimal states preserve optimal values") {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = small_graph(seed, 3 + static_cast<int>(seed % 2));
    const int arity = 2 + static_cast<int>(seed % 3 == 1);
    const auto scm = random_tabular_scm(g, arity, 7 * seed + 1);
    const auto minimal = exact_q(scm, construct_minimal_states(g));
    const auto window = exact_q(scm, full_window_states(g));
    CHECK(minimal.value(0) == doctest::Approx(window.value(0)).epsilon(1e-12));
    const auto cmp = compare_q(scm, minimal, window);
    CHECK(cmp.max_abs_diff < 1e-9);
    CHECK(cmp.argmax_mismatches == 0);
    compared += static_cast<int>(cmp.reachable);
  }
  CHECK(compared > 1000);
}

TEST_CASE("greedy action tie-break") {
  CHECK(greedy_action({0.2, 0.5, 0.5}) == 1);
  CHECK(greedy_action({0.5, 0.5 + 1e-12}) == 0);
  CHECK(greedy_action({0.1, 0.3}) == 1);
  CHECK_THROWS_AS(greedy_action({}), std::domain_error);
}

TEST_CASE("exact Markov test") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto g = small_graph(seed);
    const auto scm = random_tabular_scm(g, 2, seed);
    const auto window = test_markov(scm, full_window_states(g));
    CHECK(window.passed);
    CHECK(window.max_deviation < 1e-9);
    const auto s = construct_minimal_states(g);
    const auto a = test_markov(scm, s);
    MarkovOptions skewed;
    skewed.behavior = {0.8, 0.2};
    const auto b = test_markov(scm, s, skewed);
    CHECK(a.passed);
    CHECK(b.passed);
    CHECK(a.histories_checked == b.histories_checked);
    const auto again = test_markov(scm, s);
    CHECK(again.max_deviation == a.max_deviation);
  }
}

TEST_CASE("dropping a next-state parent breaks the Markov property") {
  int broken = 0, tried = 0;
  for (std::uint64_t seed = 0; seed < 20 && broken == 0; ++seed) {
    const auto g = small_graph(seed);
    const auto s = construct_minimal_states(g);
    const auto scm = random_tabular_scm(g, 2, seed + 50);
    for (int t = 0; t < g.horizon(); ++t)
      for (const auto& v : s.states[t]) {
        const auto reduced = without_node(g, s, t, v);
        if (check_validity(g, reduced)[Condition::NextStateParentInclusion].passed) continue;
        ++tried;
        if (!test_markov(scm, reduced).passed) ++broken;
      }
  }
  CHECK(tried > 0);
  CHECK(broken > 0);
}

TEST_CASE("sampled Markov test") {
  const auto g = small_graph(2);
  const auto scm = random_tabular_scm(g, 2, 3);
  const auto r = test_markov(scm, full_window_states(g), sampled(40000, 0.1, 5));
  CHECK(r.passed);
  CHECK(r.histories_checked > 0);
  CHECK_THROWS_AS(test_markov(scm, full_window_states(g), sampled(0, 0.1, 5)), std::domain_error);
}

TEST_CASE("lemma instances on the example graph") {
  using namespace example;
  const auto g = example_graph();
  const auto s = construct_minimal_states(g);

  struct Case {
    int t;
    NodeId v;
    LemmaCase kind;
  };
  for (const auto& c : {Case{1, x(1, X), LemmaCase::RewardParent}, Case{1, x(1, L), LemmaCase::NextStateParent},
                        Case{1, x(0, N), LemmaCase::NextStateParent}, Case{0, x(0, L), LemmaCase::NextStateParent},
                        Case{0, x(0, Y), LemmaCase::RewardParent}}) {
    CAPTURE(to_string(c.v));
    CHECK(lemma_case(g, c.t, c.v) == c.kind);
    for (double p : {0.5, 0.9}) {
      const auto scm = lemma_counterexample(g, c.t, c.v, p);
      const double full = exact_q(scm, s).value(c.t);
      const double reduced = exact_q(scm, without_node(g, s, c.t, c.v)).value(c.t);
      CHECK(std::abs(full - 1.0) < 1e-12);
      CHECK(std::abs(reduced - std::max(p, 1.0 - p)) < 1e-12);
      CHECK(std::abs((full - reduced) - (1.0 - std::max(p, 1.0 - p))) < 1e-12);
    }
  }
  CHECK_THROWS_AS(lemma_counterexample(g, 1, x(1, X), 0.0), std::domain_error);
  CHECK_THROWS_AS(lemma_counterexample(g, 1, x(1, X), 1.0), std::domain_error);
  CHECK_THROWS_AS(lemma_case(g, 1, x(1, M)), std::domain_error);
  CHECK_THROWS_AS(lemma_case(g, 1, x(2, X)), std::domain_error);
}

TEST_CASE("carried-only members have no lemma instance") {
  // X_0 -> X_2 -> R_2: X_0 sits in S_0 only to be carried to S_1.
  const FullTimeGraph g(2, 1, 2,
                        {{x(0, 0), x(2, 0)}, {x(2, 0), NodeId::reward(2)}, {NodeId::action(2), NodeId::reward(2)}});
  const auto s = construct_minimal_states(g);
  CHECK(s.states[0] == NodeSet{x(0, 0)});
  CHECK(s.states[1] == NodeSet{x(0, 0)});
  CHECK_THROWS_AS(lemma_counterexample(g, 0, x(0, 0), 0.5), std::domain_error);
  CHECK_FALSE(check_validity(g, without_node(g, s, 0, x(0, 0))).all_passed());
}

TEST_CASE("single-point deletions are invalid or lose value") {
  int gaps = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = generate_random_graph({3, 4, 2, 0.3}, seed + 300);
    const auto s = construct_minimal_states(g);
    for (int t = 0; t <= g.horizon(); ++t)
      for (const auto& v : s.states[t]) {
        const auto reduced = without_node(g, s, t, v);
        CHECK_FALSE(check_validity(g, reduced).all_passed());
        try {
          const auto scm = lemma_counterexample(g, t, v, 0.7);
          const double gap = exact_q(scm, s).value(0) - exact_q(scm, reduced).value(0);
          CHECK(std::abs(gap - 0.3) < 1e-12);
          ++gaps;
        } catch (const std::domain_error&) {
          // only members carried into S_{t+1} lack an instance
          CHECK(t < g.horizon());
          CHECK(s.states[t + 1].contains(v));
        }
      }
  }
  CHECK(gaps > 50);
}

TEST_CASE("tabular model JSON") {
  const auto scm = random_tabular_scm(small_graph(1), 3, 4);
  const auto j = tabular_scm_to_json(scm);
  const auto back = tabular_scm_from_json(j);
  CHECK(tabular_scm_to_json(back) == j);
  CHECK(back.action_arity() == 3);
}

TEST_CASE("deletion helper agrees with the hand-rolled loop") {
  const auto g = generate_random_graph({3, 4, 2, 0.3}, 301);
  const auto checks = single_point_deletions(g, 0.5);
  CHECK_FALSE(checks.empty());
  for (const auto& d : checks) {
    CHECK(d.invalid);
    if (d.gap) CHECK(std::abs(*d.gap - 0.5) < 1e-12);
  }
}
