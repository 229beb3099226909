#pragma once

// Two-phase revised simplex for equality-form linear programs
//
//   min c^T x   s.t.   A x = b,  x >= 0,
//
// specialised for the shape that arises in lattice polyconvexification: very
// few rows (k_d + 1 <= 8) and many columns. The basis inverse is rebuilt from
// scratch every iteration, which costs O(m^3) with m <= 8 and keeps the
// iterates free of accumulated update error. Pricing over the columns is the
// hot loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svpc/errors.hpp"

namespace svpc {

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-8;
  double optimality_tol = 1e-9;      ///< entering requires reduced cost < -optimality_tol
  std::size_t stall_limit = 50;      ///< iterations without progress before Bland's rule
  std::size_t iteration_factor = 10; ///< iteration cap is iteration_factor * N per phase
};

/// Non-owning view of an LP. Columns are stored contiguously: column j
/// occupies columns[j * rows, (j + 1) * rows).
struct LpView {
  std::size_t rows = 0;
  std::span<const double> cost;
  std::span<const double> columns;
  std::span<const double> rhs;

  std::size_t cols() const noexcept { return cost.size(); }
};

/// Owning LP in equality form.
struct LpProblem {
  std::size_t rows = 0;
  std::vector<double> cost;
  std::vector<double> columns;
  std::vector<double> rhs;

  LpView view() const { return {rows, cost, columns, rhs}; }
};

enum class LpStatus { optimal, infeasible };

inline const char* to_string(LpStatus s) {
  return s == LpStatus::optimal ? "optimal" : "infeasible";
}

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double objective = std::numeric_limits<double>::quiet_NaN();
  /// Basic structural variables with positive value, ascending by column.
  std::vector<std::pair<std::size_t, double>> xi;
  std::size_t iterations = 0;
};

namespace detail {

/// In-place Gauss-Jordan inverse of a dense row-major n x n matrix.
/// Returns false if a pivot falls below tol.
inline bool invert(std::vector<double>& a, std::size_t n, double tol) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < tol) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[piv * n + c], a[col * n + c]);
        std::swap(inv[piv * n + c], inv[col * n + c]);
      }
    }
    const double p = a[col * n + col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col * n + c] /= p;
      inv[col * n + c] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r * n + c] -= f * a[col * n + c];
        inv[r * n + c] -= f * inv[col * n + c];
      }
    }
  }
  a.swap(inv);
  return true;
}

class RevisedSimplex {
 public:
  RevisedSimplex(const LpView& lp, const SimplexOptions& opt)
      : lp_(lp), opt_(opt), m_(lp.rows), n_(lp.cols()) {
    if (lp.columns.size() != m_ * n_)
      throw ShapeError("LP column storage has " + std::to_string(lp.columns.size()) +
                       " entries, expected " + std::to_string(m_ * n_));
    if (lp.rhs.size() != m_)
      throw ShapeError("LP right-hand side has wrong length");
    sign_.resize(m_);
    b_.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) {
      sign_[r] = lp.rhs[r] < 0.0 ? -1.0 : 1.0;
      b_[r] = sign_[r] * lp.rhs[r];
    }
    basis_.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) basis_[r] = n_ + r;
    is_basic_.assign(n_ + m_, 0);
    for (std::size_t r = 0; r < m_; ++r) is_basic_[n_ + r] = 1;
    binv_.assign(m_ * m_, 0.0);
    xb_.assign(m_, 0.0);
    y_.assign(m_, 0.0);
    w_.assign(m_, 0.0);
  }

  LpSolution solve() {
    LpSolution sol;
    run_phase(1);
    double infeas = 0.0;
    for (std::size_t r = 0; r < m_; ++r)
      if (is_artificial(basis_[r])) infeas += xb_[r];
    double scale = 1.0;
    for (double v : b_) scale = std::max(scale, v);
    sol.iterations = iterations_;
    if (infeas > opt_.feasibility_tol * scale) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
    drive_out_artificials();
    run_phase(2);
    sol.iterations = iterations_;
    sol.status = LpStatus::optimal;
    double obj = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = basis_[r];
      if (is_artificial(j)) continue;
      const double x = std::max(0.0, xb_[r]);
      if (x > 0.0) {
        sol.xi.emplace_back(j, x);
        obj += lp_.cost[j] * x;
      }
    }
    std::sort(sol.xi.begin(), sol.xi.end());
    sol.objective = obj;
    return sol;
  }

 private:
  bool is_artificial(std::size_t j) const noexcept { return j >= n_; }

  double column_entry(std::size_t j, std::size_t r) const {
    if (is_artificial(j)) return (j - n_) == r ? 1.0 : 0.0;
    return sign_[r] * lp_.columns[j * m_ + r];
  }

  double phase_cost(std::size_t j, int phase) const {
    if (phase == 1) return is_artificial(j) ? 1.0 : 0.0;
    return is_artificial(j) ? 0.0 : lp_.cost[j];
  }

  void refactor(int phase) {
    std::vector<double> B(m_ * m_);
    for (std::size_t r = 0; r < m_; ++r)
      for (std::size_t c = 0; c < m_; ++c) B[r * m_ + c] = column_entry(basis_[c], r);
    if (!invert(B, m_, 1e-14))
      throw SolverError("singular basis after " + std::to_string(iterations_) +
                        " simplex iterations");
    binv_.swap(B);
    for (std::size_t r = 0; r < m_; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < m_; ++c) s += binv_[r * m_ + c] * b_[c];
      xb_[r] = s;
    }
    for (std::size_t c = 0; c < m_; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < m_; ++r) s += phase_cost(basis_[r], phase) * binv_[r * m_ + c];
      y_[c] = s;
    }
  }

  double reduced_cost(std::size_t j, int phase) const {
    double d = phase_cost(j, phase);
    if (is_artificial(j)) return d - y_[j - n_];
    const double* a = lp_.columns.data() + j * m_;
    for (std::size_t r = 0; r < m_; ++r) d -= y_[r] * sign_[r] * a[r];
    return d;
  }

  void direction(std::size_t j) {
    for (std::size_t r = 0; r < m_; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < m_; ++c) s += binv_[r * m_ + c] * column_entry(j, c);
      w_[r] = s;
    }
  }

  double objective(int phase) const {
    double s = 0.0;
    for (std::size_t r = 0; r < m_; ++r) s += phase_cost(basis_[r], phase) * xb_[r];
    return s;
  }

  void pivot(std::size_t row, std::size_t entering) {
    is_basic_[basis_[row]] = 0;
    basis_[row] = entering;
    is_basic_[entering] = 1;
  }

  void run_phase(int phase) {
    const std::size_t cap = std::max<std::size_t>(opt_.iteration_factor * n_, 100);
    std::size_t phase_iters = 0;
    bool bland = false;
    std::size_t no_progress = 0;
    refactor(phase);
    double best = objective(phase);
    for (;;) {
      // Artificials may leave but never re-enter; in phase 2 they are barred.
      std::size_t entering = n_;
      double most_negative = -opt_.optimality_tol;
      for (std::size_t j = 0; j < n_; ++j) {
        if (is_basic_[j]) continue;
        const double d = reduced_cost(j, phase);
        if (d < most_negative) {
          entering = j;
          if (bland) break;
          most_negative = d;
        }
      }
      if (entering == n_) return;

      direction(entering);
      std::size_t leave = m_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        double ratio = 0.0;
        if (phase == 2 && is_artificial(basis_[r])) {
          // A zero-level artificial left from phase 1 must stay at zero.
          if (std::abs(w_[r]) <= opt_.pivot_tol) continue;
          ratio = 0.0;
        } else {
          if (w_[r] <= opt_.pivot_tol) continue;
          ratio = std::max(0.0, xb_[r]) / w_[r];
        }
        bool take = false;
        if (leave == m_ || ratio < best_ratio - 1e-12) {
          take = true;
        } else if (ratio <= best_ratio + 1e-12) {
          take = bland ? basis_[r] < basis_[leave] : std::abs(w_[r]) > std::abs(w_[leave]);
        }
        if (take) {
          leave = r;
          best_ratio = ratio;
        }
      }
      if (leave == m_)
        throw SolverError("LP unbounded in phase " + std::to_string(phase) +
                          " at column " + std::to_string(entering));

      pivot(leave, entering);
      refactor(phase);
      ++iterations_;
      ++phase_iters;

      const double obj = objective(phase);
      if (obj < best - 1e-12 * std::max(1.0, std::abs(best))) {
        best = obj;
        no_progress = 0;
      } else if (++no_progress >= opt_.stall_limit) {
        bland = true;
      }
      if (phase_iters > cap)
        throw SolverError("simplex iteration cap " + std::to_string(cap) +
                          " exceeded in phase " + std::to_string(phase) + " (objective " +
                          std::to_string(obj) + ", " + std::to_string(n_) + " columns)");
    }
  }

  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (!is_artificial(basis_[r])) continue;
      // Row r of B^-1 A; any structural column with a usable entry can replace
      // the artificial in a degenerate pivot.
      std::size_t best_j = n_;
      double best_abs = opt_.pivot_tol;
      for (std::size_t j = 0; j < n_; ++j) {
        if (is_basic_[j]) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < m_; ++c) s += binv_[r * m_ + c] * column_entry(j, c);
        if (std::abs(s) > best_abs) {
          best_abs = std::abs(s);
          best_j = j;
        }
      }
      if (best_j == n_) continue;  // redundant row
      pivot(r, best_j);
      refactor(2);
    }
  }

  LpView lp_;
  SimplexOptions opt_;
  std::size_t m_;
  std::size_t n_;
  std::vector<double> sign_;
  std::vector<double> b_;
  std::vector<std::size_t> basis_;
  std::vector<char> is_basic_;
  std::vector<double> binv_;
  std::vector<double> xb_;
  std::vector<double> y_;
  std::vector<double> w_;
  std::size_t iterations_ = 0;
};

}  // namespace detail

/// Solves min c^T x s.t. A x = b, x >= 0. Infeasibility is reported through
/// the status; numerical breakdown and iteration-cap overruns throw SolverError.
inline LpSolution lp_solve(const LpView& lp, const SimplexOptions& opt = {}) {
  if (lp.rows == 0) throw ShapeError("LP has no rows");
  if (lp.cols() == 0) {
    LpSolution s;
    s.status = LpStatus::infeasible;
    return s;
  }
  return detail::RevisedSimplex(lp, opt).solve();
}

inline LpSolution lp_solve(const LpProblem& lp, const SimplexOptions& opt = {}) {
  return lp_solve(lp.view(), opt);
}

}  // namespace svpc
