#include "mose/generator.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace mose {

FullTimeGraph generate_random_graph(const GraphGenParams& params, std::uint64_t seed) {
  const int m = params.vars_per_step;
  const int T = params.horizon;
  const int W = params.order;
  if (m < 1 || T < 0 || W < 1) throw std::domain_error("graph generator needs m >= 1, T >= 0, W >= 1");
  if (!(params.density >= 0.0 && params.density <= 1.0))
    throw std::domain_error("edge density must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&] { return unit(rng) < params.density; };

  // {W, 1, 0} read literally; for W == 1 the two lagged entries coincide.
  const std::set<int, std::greater<>> lags = {W, 1, 0};

  std::vector<Edge> edges;
  std::vector<int> rank(m);
  for (int t = 0; t <= T; ++t) {
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < m; ++k) rank[perm[k]] = k;

    for (int i = 0; i < m; ++i) {
      for (int lag : lags) {
        const int u = t - lag;
        if (u < 0) continue;
        for (int j = 0; j < m; ++j) {
          if (lag == 0 && rank[j] >= rank[i]) continue;
          if (coin()) edges.push_back({NodeId::obs(u, j), NodeId::obs(t, i)});
        }
      }
      if (t > 0) edges.push_back({NodeId::action(t - 1), NodeId::obs(t, i)});
    }
    for (int j = 0; j < m; ++j)
      if (coin()) edges.push_back({NodeId::obs(t, j), NodeId::reward(t)});
    edges.push_back({NodeId::action(t), NodeId::reward(t)});
  }
  return FullTimeGraph(T, m, W, std::move(edges));
}

}  // namespace mose
