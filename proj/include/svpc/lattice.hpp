#pragma once

// Structured lattices in signed-singular-value space. Each axis is the sorted
// union of segments; a segment is either an arithmetic progression or a
// quadratic refinement toward a chosen point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "svpc/errors.hpp"
#include "svpc/ssv.hpp"

namespace svpc {

enum class Spacing { uniform, quadratic };

struct Segment {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t count = 2;
  Spacing spacing = Spacing::uniform;
  double refine_toward = 0.0;  ///< only for quadratic spacing; must lie in [lo, hi]

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct LatticeSpec {
  int d = 2;
  /// One segment list per axis. A single entry is shared by all axes.
  std::vector<std::vector<Segment>> axes;

  static LatticeSpec uniform(int d, double lo, double hi, std::size_t count) {
    return {d, {{Segment{lo, hi, count, Spacing::uniform, 0.0}}}};
  }
  static LatticeSpec quadratic(int d, double lo, double hi, std::size_t count,
                               double toward = 0.0) {
    return {d, {{Segment{lo, hi, count, Spacing::quadratic, toward}}}};
  }

  const std::vector<Segment>& axis(int i) const {
    return axes.size() == 1 ? axes.front() : axes.at(static_cast<std::size_t>(i));
  }

  void validate() const {
    require_dimension(d);
    if (axes.empty()) throw SpecError("lattice spec has no axes");
    if (axes.size() != 1 && axes.size() != static_cast<std::size_t>(d))
      throw SpecError("lattice spec needs 1 or d axis descriptions, got " +
                      std::to_string(axes.size()));
    for (const auto& segs : axes) {
      if (segs.empty()) throw SpecError("lattice axis has no segments");
      for (const auto& s : segs) {
        if (s.count < 2) throw SpecError("segment count must be at least 2");
        if (!(s.lo < s.hi)) throw SpecError("segment requires lo < hi");
        if (s.spacing == Spacing::quadratic &&
            !(s.refine_toward >= s.lo && s.refine_toward <= s.hi))
          throw SpecError("quadratic refinement point outside its segment");
      }
    }
  }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

namespace detail {

// Points are mirrored from both ends so that a segment symmetric about zero
// yields exactly symmetric knots.
inline std::vector<double> uniform_knots(const Segment& s) {
  const std::size_t n = s.count;
  const double span = s.hi - s.lo;
  const double last = static_cast<double>(n - 1);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (2 * i <= n - 1)
      x[i] = s.lo + span * (static_cast<double>(i) / last);
    else
      x[i] = s.hi - span * (static_cast<double>(n - 1 - i) / last);
  }
  x.front() = s.lo;
  x.back() = s.hi;
  return x;
}

// t in [0, 1] is mapped by sign(t - t0) (t - t0)^2, rescaled per side so that
// lo, hi and the refinement point are interpolated.
inline std::vector<double> quadratic_knots(const Segment& s) {
  const std::size_t n = s.count;
  const double last = static_cast<double>(n - 1);
  const double t0 = (s.refine_toward - s.lo) / (s.hi - s.lo);
  const double i0 = t0 * last;
  const double i0_rounded = std::round(i0);
  const bool integral = std::abs(i0 - i0_rounded) < 1e-9;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = static_cast<double>(i);
    double frac = 0.0;
    bool upper = false;
    if (integral) {
      const auto k0 = static_cast<std::ptrdiff_t>(i0_rounded);
      const auto k = static_cast<std::ptrdiff_t>(i);
      upper = k >= k0;
      // Integer differences keep mirrored knots bit-identical.
      frac = upper ? (k0 == static_cast<std::ptrdiff_t>(n - 1)
                          ? 0.0
                          : static_cast<double>(k - k0) /
                                static_cast<double>(static_cast<std::ptrdiff_t>(n - 1) - k0))
                   : static_cast<double>(k0 - k) / static_cast<double>(k0);
    } else {
      upper = fi >= i0;
      frac = upper ? (fi - i0) / (last - i0) : (i0 - fi) / i0;
    }
    const double q = frac * frac;
    x[i] = upper ? s.refine_toward + (s.hi - s.refine_toward) * q
                 : s.refine_toward - (s.refine_toward - s.lo) * q;
  }
  x.front() = s.lo;
  x.back() = s.hi;
  return x;
}

}  // namespace detail

/// Sorted union of all segment knots along one axis, near-duplicates merged.
inline std::vector<double> axis_knots(const std::vector<Segment>& segments) {
  std::vector<double> all;
  for (const auto& s : segments) {
    auto k = s.spacing == Spacing::uniform ? detail::uniform_knots(s)
                                           : detail::quadratic_knots(s);
    all.insert(all.end(), k.begin(), k.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double x : all) {
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  }
  if (out.empty()) throw SpecError("lattice axis is empty");
  return out;
}

/// Cartesian product of axis knots; the last axis varies fastest.
class Lattice {
 public:
  Lattice() = default;

  explicit Lattice(std::vector<std::vector<double>> knots) : knots_(std::move(knots)) {
    require_dimension(static_cast<int>(knots_.size()));
    std::size_t n = 1;
    for (const auto& k : knots_) {
      if (k.empty()) throw SpecError("lattice axis is empty");
      n *= k.size();
    }
    points_.reserve(n);
    const int d = dim();
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
      std::size_t rem = flat;
      for (int a = d - 1; a >= 0; --a) {
        const auto ua = static_cast<std::size_t>(a);
        idx[ua] = rem % knots_[ua].size();
        rem /= knots_[ua].size();
      }
      std::vector<double> coords(static_cast<std::size_t>(d));
      for (int a = 0; a < d; ++a)
        coords[static_cast<std::size_t>(a)] =
            knots_[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
      points_.emplace_back(std::span<const double>(coords));
    }
  }

  int dim() const noexcept { return static_cast<int>(knots_.size()); }
  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<SsvVector>& points() const noexcept { return points_; }
  const SsvVector& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<double>& knots(int axis) const {
    return knots_.at(static_cast<std::size_t>(axis));
  }
  std::vector<std::size_t> shape() const {
    std::vector<std::size_t> s;
    for (const auto& k : knots_) s.push_back(k.size());
    return s;
  }

  bool contains(const SsvVector& v) const {
    if (v.dim() != dim()) return false;
    for (int a = 0; a < dim(); ++a) {
      const auto& k = knots(a);
      if (v[a] < k.front() || v[a] > k.back()) return false;
    }
    return true;
  }

  /// Index of the lattice point whose coordinates are the nearest knots of v.
  std::size_t nearest_index(const SsvVector& v) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim(); ++a) {
      const auto& k = knots(a);
      auto it = std::lower_bound(k.begin(), k.end(), v[a]);
      std::size_t j = 0;
      if (it == k.end()) {
        j = k.size() - 1;
      } else {
        j = static_cast<std::size_t>(it - k.begin());
        if (j > 0 && std::abs(k[j - 1] - v[a]) <= std::abs(k[j] - v[a])) --j;
      }
      flat = flat * k.size() + j;
    }
    return flat;
  }

 private:
  std::vector<std::vector<double>> knots_;
  std::vector<SsvVector> points_;
};

inline Lattice build_lattice(const LatticeSpec& spec) {
  spec.validate();
  std::vector<std::vector<double>> knots;
  for (int a = 0; a < spec.d; ++a) knots.push_back(axis_knots(spec.axis(a)));
  return Lattice(std::move(knots));
}

}  // namespace svpc
