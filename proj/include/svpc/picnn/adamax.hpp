#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "svpc/errors.hpp"
#include "svpc/picnn/network.hpp"

namespace svpc::nn {

struct AdamaxState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<std::vector<double>> m;  ///< first moments, one per tensor
  std::vector<std::vector<double>> u;  ///< infinity-norm accumulators

  AdamaxState() = default;
  explicit AdamaxState(const NetworkParams& p) {
    for (const auto& t : p.tensors()) {
      m.emplace_back(t.data.size(), 0.0);
      u.emplace_back(t.data.size(), 0.0);
    }
  }
};

/// One ADAMAX update of params in place. Projection is left to the caller.
inline void adamax_step(AdamaxState& s, NetworkParams& params, const NetworkParams& grads,
                        double lr) {
  auto& P = params.tensors();
  const auto& G = grads.tensors();
  if (G.size() != P.size() || s.m.size() != P.size())
    throw ShapeError("optimizer state does not match the network");
  ++s.t;
  const double step = lr / (1.0 - std::pow(s.beta1, static_cast<double>(s.t)));
  for (std::size_t k = 0; k < P.size(); ++k) {
    auto& p = P[k].data;
    const auto& g = G[k].data;
    auto& m = s.m[k];
    auto& u = s.u[k];
    if (g.size() != p.size()) throw ShapeError("gradient shape mismatch in " + P[k].name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      u[i] = std::max(s.beta2 * u[i], std::abs(g[i]));
      p[i] -= step * m[i] / (u[i] + s.eps);
    }
  }
}

}  // namespace svpc::nn
