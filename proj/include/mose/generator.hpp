#pragma once

#include <cstdint>

#include "mose/time_graph.hpp"

namespace mose {

struct GraphGenParams {
  int vars_per_step = 10;
  int horizon = 24;
  int order = 2;
  double density = 0.165;
};

/// Random full time graph following the synthetic protocol: each X_t^i draws
/// parents independently with probability `density` from the observations at
/// lags exactly {W, 1, 0}; same-time parents must rank lower in a per-step
/// random permutation, which keeps every step acyclic. R_t draws parents from
/// X_t the same way. A_t always feeds R_t and every X_{t+1}^i.
///
/// Deterministic given (params, seed).
FullTimeGraph generate_random_graph(const GraphGenParams& params, std::uint64_t seed);

}  // namespace mose
