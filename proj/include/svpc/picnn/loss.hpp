#pragma once

// Penalised training loss
//
//   L = L_mse + lambda_ineq L_ineq + lambda_sym L_sym
//
// L_mse is a mean over the batch, L_ineq = sum_i max(pred_i - phi_i, 0)^2 is a
// plain sum, and L_sym averages the squared orbit discrepancy over the batch
// and over the #Pi_d - 1 non-identity group elements.

#include <algorithm>
#include <cstddef>
#include <span>

#include "svpc/errors.hpp"

namespace svpc::nn {

struct LossParts {
  double total = 0.0;
  double mse = 0.0;
  double ineq = 0.0;
  double sym = 0.0;
};

/// orbit_preds holds, row by row, the predictions at pi(nu_i) for every
/// non-identity pi; its length must be a multiple of preds.size(). Empty means
/// no symmetry term.
inline LossParts loss(std::span<const double> preds, std::span<const double> targets,
                      std::span<const double> phi, std::span<const double> orbit_preds,
                      double lambda_ineq, double lambda_sym) {
  const std::size_t n = preds.size();
  if (targets.size() != n || phi.size() != n)
    throw ShapeError("loss inputs have mismatched lengths");
  if (n == 0) throw ShapeError("loss of an empty batch");
  if (orbit_preds.size() % n != 0)
    throw ShapeError("orbit predictions are not a whole number per sample");
  const std::size_t g = orbit_preds.size() / n;
  LossParts out;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = preds[i] - targets[i];
    out.mse += e * e;
    const double over = std::max(preds[i] - phi[i], 0.0);
    out.ineq += over * over;
    for (std::size_t j = 0; j < g; ++j) {
      const double s = preds[i] - orbit_preds[i * g + j];
      out.sym += s * s;
    }
  }
  out.mse /= static_cast<double>(n);
  if (g > 0) out.sym /= static_cast<double>(n * g);
  out.total = out.mse + lambda_ineq * out.ineq + lambda_sym * out.sym;
  return out;
}

}  // namespace svpc::nn
