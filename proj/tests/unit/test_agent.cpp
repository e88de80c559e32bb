#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mose/agent.hpp"
#include "mose/generator.hpp"

using namespace mose;

namespace {

std::vector<double> iota_obs(int steps, int m) {
  std::vector<double> v(steps * m);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 0.05 + 0.1 * static_cast<double>(k);  // stays inside the clamp
  return v;
}

AgentConfig small_config(int w_max) {
  AgentConfig c;
  c.hidden = 16;
  c.batch = 8;
  c.learning_starts = 1;
  c.total_episodes = 100;
  c.w_max = w_max;
  return c;
}

}  // namespace

TEST_CASE("standardizer") {
  Standardizer off(2, false);
  CHECK(off.apply(0, 3.0) == 3.0);
  CHECK(off.apply(1, 100.0) == kClamp);
  Standardizer st(2);
  CHECK(st.apply(0, 1.5) == 1.5);  // nothing seen yet
  st.observe({1.0, 10.0, 3.0, 10.0});
  CHECK(st.apply(0, 2.0) == doctest::Approx(0.0));
  CHECK(st.apply(0, 2.0 + std::sqrt(2.0)) == doctest::Approx(1.0));
  CHECK(st.apply(1, 11.0) == doctest::Approx(1.0));  // zero spread: centred only
  CHECK(st.apply(0, -1e9) == -kClamp);
  CHECK_THROWS_AS(st.observe({1.0, 2.0, 3.0}), std::domain_error);
}

TEST_CASE("featurizer windows") {
  const int m = 3, T = 4;
  const Featurizer f(m, T, 2, nullptr);
  const Standardizer st(m, false);
  const auto obs = iota_obs(T + 1, m);
  CHECK(f.width() == 9);

  SUBCASE("full window has no sentinel once h >= w_max") {
    for (int h = 2; h <= T; ++h) {
      const auto x = f.featurize(FeatureMode::window(2), h, obs, st);
      for (float v : x) CHECK(v != static_cast<float>(kSentinel));
      CHECK(x[0] == static_cast<float>(obs[h * m]));
      CHECK(x[m + 1] == static_cast<float>(obs[(h - 1) * m + 1]));
    }
  }
  SUBCASE("early steps pad with the sentinel") {
    const auto x = f.featurize(FeatureMode::window(2), 0, obs, st);
    for (int k = 0; k < m; ++k) CHECK(x[k] == static_cast<float>(obs[k]));
    for (int k = m; k < 3 * m; ++k) CHECK(x[k] == static_cast<float>(kSentinel));
  }
  SUBCASE("window zero keeps only the current step") {
    const auto x = f.featurize(FeatureMode::window(0), 3, obs, st);
    for (int k = 0; k < m; ++k) CHECK(x[k] == static_cast<float>(obs[3 * m + k]));
    for (int k = m; k < 3 * m; ++k) CHECK(x[k] == static_cast<float>(kSentinel));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(f.featurize(FeatureMode::window(3), 1, obs, st), std::domain_error);
    CHECK_THROWS_AS(f.featurize(FeatureMode::dag(), 1, obs, st), std::domain_error);
    CHECK_THROWS_AS(f.featurize(FeatureMode::reward_parents(), 1, obs, st), std::domain_error);
    CHECK_THROWS_AS(f.featurize(FeatureMode::window(0), T + 1, obs, st), std::domain_error);
    const std::vector<double> short_obs(m, 0.0);
    CHECK_THROWS_AS(f.featurize(FeatureMode::window(0), 1, short_obs, st), std::domain_error);
  }
}

TEST_CASE("featurizer dag states on the example graph") {
  using namespace example;
  const auto g = example_graph();
  const int m = g.vars_per_step();
  const Standardizer st(m, false);
  const auto obs = iota_obs(g.horizon() + 1, m);
  CHECK_THROWS_AS(Featurizer(m, g.horizon(), 0, &g), std::domain_error);  // S_1 reaches back to N_0

  const Featurizer f(m, g.horizon(), 1, &g);
  const auto x = f.featurize(FeatureMode::dag(), 2, obs, st);
  for (int k = 0; k < f.width(); ++k) {
    const bool kept = k == W || k == X || k == Y;
    CHECK((x[k] != static_cast<float>(kSentinel)) == kept);
    if (kept) CHECK(x[k] == static_cast<float>(obs[2 * m + k]));
  }
  const auto x1 = f.featurize(FeatureMode::dag(), 1, obs, st);
  CHECK(x1[m + N] == static_cast<float>(obs[N]));
  CHECK(x1[L] == static_cast<float>(obs[m + L]));
  CHECK(x1[M] == static_cast<float>(kSentinel));

  const auto p = f.featurize(FeatureMode::reward_parents(), 1, obs, st);
  int kept = 0;
  for (float v : p) kept += v != static_cast<float>(kSentinel);
  CHECK(kept == static_cast<int>(reward_parents(g, 1).size()));
}

TEST_CASE("replay buffer") {
  ReplayBuffer rb(10, 3);
  for (int k = 0; k < 5; ++k) rb.add({{static_cast<double>(k)}, {0}, {0.0}});
  CHECK(rb.episodes() == 3);
  CHECK(rb.transitions() == 9);
  CHECK(rb.at(0).obs[0] == 2.0);
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    auto s = rb.sample(8, rng);
    CHECK(s.size() == 3);
    std::sort(s.begin(), s.end());
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }
  CHECK(rb.sample(2, rng).size() == 2);
  CHECK_THROWS_AS(ReplayBuffer(2, 3), std::domain_error);
}

TEST_CASE("acting") {
  auto cfg = small_config(1);
  Agent agent(cfg, 2, 3, 3, nullptr, 5);
  const std::vector<float> x(agent.featurizer().width(), 0.25f);

  SUBCASE("zero nets pick action 0") {
    for (auto& net : agent.ensemble().online) net = Net::zeros(net.sizes());
    CHECK(agent.act(x, 1, 0.0) == 0);
  }
  SUBCASE("a hand-set output bias decides") {
    auto& net = agent.ensemble().online[2];
    net = Net::zeros(net.sizes());
    net.biases.back()(2) = 1.0f;
    CHECK(agent.act(x, 2, 0.0) == 2);
  }
  SUBCASE("exploration is reproducible and uniform") {
    Agent a(cfg, 2, 3, 3, nullptr, 9), b(cfg, 2, 3, 3, nullptr, 9);
    std::vector<int> counts(3, 0);
    for (int k = 0; k < 3000; ++k) {
      const int u = a.act(x, 0, 1.0);
      CHECK(u == b.act(x, 0, 1.0));
      ++counts[u];
    }
    for (int c : counts) CHECK(std::abs(c - 1000) < 150);
  }
  CHECK(argmax_lowest(std::vector<float>{1.0f, 3.0f, 3.0f}.data(), 3) == 1);
  CHECK(agent.epsilon(0) == 1.0);
  CHECK(agent.epsilon(5) == doctest::Approx(0.525));
  CHECK(agent.epsilon(50) == doctest::Approx(0.05));
}

TEST_CASE("td updates") {
  const auto g = generate_random_graph({3, 3, 1, 0.4}, 7);
  Environment env(sample_spec(g, DgpFamily::LinearAnm, 1));
  auto cfg = small_config(1);
  cfg.learning_starts = 1000;
  Agent agent(cfg, 3, 3, 2, &g, 3);
  agent.train_episode_mose(env, 1, false, 0, 1);
  CHECK(agent.total_updates() == 0);
  CHECK_FALSE(agent.td_update({0}, 3, FeatureMode::window(0)).has_value());

  cfg.learning_starts = 1;
  Agent live(cfg, 3, 3, 2, &g, 3);
  live.train_episode_baseline(env, FeatureMode::window(1), 1, 0, 1);

  SUBCASE("terminal step regresses onto the reward") {
    auto& net = live.ensemble().online[3];
    net = Net::zeros(net.sizes());
    const double r = live.replay().at(0).rewards[3];
    const int a = live.replay().at(0).actions[3];
    net.biases.back()(a) = static_cast<float>(r);
    const auto loss = live.td_update({0}, 3, FeatureMode::window(1));
    REQUIRE(loss.has_value());
    CHECK(*loss == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("bootstrap uses the online argmax and the target value") {
    auto& ens = live.ensemble();
    for (auto* n : {&ens.online[0], &ens.online[1], &ens.target[1]}) *n = Net::zeros(n->sizes());
    ens.online[1].biases.back()(1) = 5.0f;   // online prefers action 1
    ens.target[1].biases.back()(0) = 100.0f;  // target would prefer action 0
    ens.target[1].biases.back()(1) = 2.0f;
    const auto& e = live.replay().at(0);
    const double y = e.rewards[0] + 2.0;
    ens.online[0].biases.back()(e.actions[0]) = static_cast<float>(y);
    const auto loss = live.td_update({0}, 0, FeatureMode::window(1));
    REQUIRE(loss.has_value());
    CHECK(*loss == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("repeated updates fit a fixed batch") {
    for (int k = 1; k < 8; ++k) live.train_episode_baseline(env, FeatureMode::window(1), 1, k, 1 + k);
    const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5, 6, 7};
    const double first = *live.td_update(batch, 3, FeatureMode::window(1));
    double last = first;
    for (int k = 0; k < 300; ++k) last = *live.td_update(batch, 3, FeatureMode::window(1));
    CHECK(last < 0.1 * first);
  }
}

TEST_CASE("update counts per episode") {
  const auto g = generate_random_graph({3, 4, 2, 0.3}, 2);
  Environment env(sample_spec(g, DgpFamily::TanhPnl, 4));
  auto cfg = small_config(2);
  const int H = 4;
  for (int w = 0; w <= 2; ++w)
    for (bool causal : {false, true}) {
      Agent agent(cfg, 3, H, 2, &g, 1);
      agent.train_episode_mose(env, w, causal, 0, 10);
      agent.train_episode_mose(env, w, causal, 1, 11);
      CHECK(agent.last_episode_updates() == (H + 1) * (w + 1 + (causal ? 1 : 0)));
      for (long u : agent.ensemble().updates) CHECK(u == 2 * (w + 1 + (causal ? 1 : 0)));
    }
  for (int k : {1, 3}) {
    Agent agent(cfg, 3, H, 2, &g, 1);
    agent.train_episode_baseline(env, FeatureMode::window(0), k, 0, 10);
    CHECK(agent.last_episode_updates() == (H + 1) * k);
  }
  Agent agent(cfg, 3, H, 2, nullptr, 1);
  CHECK_THROWS_AS(agent.train_episode_mose(env, 3, false, 0, 1), std::domain_error);
  CHECK_THROWS_AS(agent.train_episode_mose(env, 1, true, 0, 1), std::domain_error);
  CHECK_THROWS_AS(agent.train_episode_baseline(env, FeatureMode::window(0), 0, 0, 1), std::domain_error);
}

TEST_CASE("target nets follow every target_interval updates") {
  const auto g = generate_random_graph({2, 2, 1, 0.5}, 3);
  Environment env(sample_spec(g, DgpFamily::LinearAnm, 2));
  auto cfg = small_config(1);
  cfg.target_interval = 3;
  Agent agent(cfg, 2, 2, 2, &g, 6);
  agent.train_episode_baseline(env, FeatureMode::window(1), 2, 0, 1);  // 2 updates per net
  auto& ens = agent.ensemble();
  CHECK(ens.target[0].weights[0] != ens.online[0].weights[0]);
  agent.train_episode_baseline(env, FeatureMode::window(1), 1, 1, 2);  // third update
  CHECK(ens.target[0].weights[0] == ens.online[0].weights[0]);
}

TEST_CASE("training is deterministic and checkpoints round trip") {
  const auto g = generate_random_graph({3, 3, 1, 0.4}, 5);
  const auto spec = sample_spec(g, DgpFamily::SinCosPnl, 5);
  auto run = [&](std::uint64_t seed) {
    Environment env(spec);
    Agent agent(small_config(1), 3, 3, 2, &g, seed);
    std::vector<double> rewards;
    for (int k = 0; k < 20; ++k) rewards.push_back(agent.train_episode_mose(env, 1, true, k, 100 + k));
    return std::pair{rewards, agent.ensemble().online[1].weights[0]};
  };
  const auto a = run(1), b = run(1), c = run(2);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.second != c.second);

  Environment env(spec);
  Agent agent(small_config(1), 3, 3, 2, &g, 4);
  for (int k = 0; k < 5; ++k) agent.train_episode_mose(env, 1, false, k, k);
  const auto path = std::filesystem::temp_directory_path() / "mose_agent_ckpt.bin";
  agent.save(path);
  Agent other(small_config(1), 3, 3, 2, &g, 99);
  other.load(path);
  for (int h = 0; h <= 3; ++h) CHECK(other.ensemble().online[h].weights[2] == agent.ensemble().online[h].weights[2]);
  auto wide = small_config(1);
  wide.hidden = 8;
  Agent mismatch(wide, 3, 3, 2, &g, 1);
  CHECK_THROWS_AS(mismatch.load(path), std::runtime_error);
  std::filesystem::remove(path);

  const auto j = agent_config_to_json(small_config(1));
  CHECK(agent_config_to_json(agent_config_from_json(j)) == j);
}
