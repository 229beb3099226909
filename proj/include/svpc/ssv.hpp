#pragma once

// Signed singular values, their minors lifting, and the signed permutation
// group under which isotropic densities are invariant.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "svpc/errors.hpp"

namespace svpc {

inline void require_dimension(int d) {
  if (d != 2 && d != 3)
    throw DimensionError("unsupported dimension " + std::to_string(d) +
                         " (expected 2 or 3)");
}

/// Number of minors of a d-vector: 2^d - 1.
constexpr int minors_count(int d) { return (1 << d) - 1; }

/// Inverse of minors_count for d in {2, 3}.
inline int dimension_of_minors(std::size_t k) {
  if (k == 3) return 2;
  if (k == 7) return 3;
  throw DimensionError("minors vector of length " + std::to_string(k) +
                       " does not correspond to d = 2 or d = 3");
}

/// A point of signed-singular-value space, d in {2, 3}.
class SsvVector {
 public:
  SsvVector() = default;

  SsvVector(std::initializer_list<double> values)
      : SsvVector(std::span<const double>(values.begin(), values.size())) {}

  explicit SsvVector(std::span<const double> values) {
    require_dimension(static_cast<int>(values.size()));
    d_ = static_cast<int>(values.size());
    std::copy(values.begin(), values.end(), v_.begin());
  }

  int dim() const noexcept { return d_; }
  double operator[](int i) const { return v_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return v_[static_cast<std::size_t>(i)]; }

  std::span<const double> values() const noexcept {
    return {v_.data(), static_cast<std::size_t>(d_)};
  }

  bool finite() const noexcept {
    return std::all_of(v_.begin(), v_.begin() + d_,
                       [](double x) { return std::isfinite(x); });
  }

  double product() const noexcept {
    double p = 1.0;
    for (int i = 0; i < d_; ++i) p *= v_[static_cast<std::size_t>(i)];
    return p;
  }

  double squared_norm() const noexcept {
    double s = 0.0;
    for (int i = 0; i < d_; ++i)
      s += v_[static_cast<std::size_t>(i)] * v_[static_cast<std::size_t>(i)];
    return s;
  }

  friend bool operator==(const SsvVector& a, const SsvVector& b) noexcept {
    if (a.d_ != b.d_) return false;
    for (int i = 0; i < a.d_; ++i)
      if (a.v_[static_cast<std::size_t>(i)] != b.v_[static_cast<std::size_t>(i)])
        return false;
    return true;
  }

  /// Lexicographic order, used for exact-key deduplication.
  friend bool operator<(const SsvVector& a, const SsvVector& b) noexcept {
    if (a.d_ != b.d_) return a.d_ < b.d_;
    return std::lexicographical_compare(a.v_.begin(), a.v_.begin() + a.d_,
                                        b.v_.begin(), b.v_.begin() + b.d_);
  }

 private:
  std::array<double, 3> v_{};
  int d_ = 0;
};

/// The lifted vector m(v) of a signed-singular-value vector.
class MinorsVector {
 public:
  MinorsVector() = default;

  explicit MinorsVector(std::span<const double> values) {
    d_ = dimension_of_minors(values.size());
    std::copy(values.begin(), values.end(), m_.begin());
  }

  MinorsVector(std::initializer_list<double> values)
      : MinorsVector(std::span<const double>(values.begin(), values.size())) {}

  int source_dim() const noexcept { return d_; }
  std::size_t size() const noexcept {
    return d_ == 0 ? 0 : static_cast<std::size_t>(minors_count(d_));
  }
  double operator[](std::size_t i) const { return m_[i]; }
  std::span<const double> values() const noexcept { return {m_.data(), size()}; }

  /// The signed singular values are the first d entries.
  SsvVector ssv() const { return SsvVector(std::span<const double>(m_.data(), d_)); }

  friend bool operator==(const MinorsVector& a, const MinorsVector& b) noexcept {
    return a.d_ == b.d_ && std::equal(a.m_.begin(), a.m_.begin() + a.size(),
                                      b.m_.begin());
  }

 private:
  std::array<double, 7> m_{};
  int d_ = 0;
};

/// m(v): (v1, v2, v1 v2) for d = 2 and
/// (v1, v2, v3, v2 v3, v3 v1, v1 v2, v1 v2 v3) for d = 3.
inline MinorsVector minors(const SsvVector& v) {
  require_dimension(v.dim());
  if (v.dim() == 2) {
    const std::array<double, 3> m{v[0], v[1], v[0] * v[1]};
    return MinorsVector(m);
  }
  const std::array<double, 7> m{v[0],        v[1],        v[2],
                                v[1] * v[2], v[2] * v[0], v[0] * v[1],
                                v[0] * v[1] * v[2]};
  return MinorsVector(m);
}

/// Element of the group of signed permutations with sign product +1.
/// Acts as out[i] = signs[i] * v[perm[i]].
struct SignedPermutation {
  std::array<int, 3> perm{0, 1, 2};
  std::array<int, 3> signs{1, 1, 1};
  int d = 2;

  bool is_identity() const noexcept {
    for (int i = 0; i < d; ++i)
      if (perm[static_cast<std::size_t>(i)] != i ||
          signs[static_cast<std::size_t>(i)] != 1)
        return false;
    return true;
  }

  SsvVector apply(const SsvVector& v) const {
    if (v.dim() != d)
      throw DimensionError("signed permutation of dimension " + std::to_string(d) +
                           " applied to a vector of dimension " +
                           std::to_string(v.dim()));
    SsvVector out = v;
    for (int i = 0; i < d; ++i) {
      const auto k = static_cast<std::size_t>(i);
      out[i] = signs[k] * v[perm[k]];
    }
    return out;
  }

  SsvVector operator()(const SsvVector& v) const { return apply(v); }

  friend bool operator==(const SignedPermutation&, const SignedPermutation&) = default;
};

/// All d! 2^(d-1) elements, identity first.
inline std::vector<SignedPermutation> symmetry_group(int d) {
  require_dimension(d);
  std::vector<SignedPermutation> group;
  std::array<int, 3> perm{0, 1, 2};
  do {
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      if (std::popcount(mask) % 2 != 0) continue;
      SignedPermutation g;
      g.d = d;
      g.perm = perm;
      for (int i = 0; i < d; ++i)
        g.signs[static_cast<std::size_t>(i)] = (mask >> i) & 1u ? -1 : 1;
      group.push_back(g);
    }
  } while (std::next_permutation(perm.begin(), perm.begin() + d));
  return group;
}

/// {pi(v) : pi in the symmetry group}, exact duplicates removed, in group order.
inline std::vector<SsvVector> orbit(const SsvVector& v) {
  std::vector<SsvVector> out;
  for (const auto& g : symmetry_group(v.dim())) {
    SsvVector w = g(v);
    // -0.0 and 0.0 compare equal; normalize so output is canonical.
    for (int i = 0; i < w.dim(); ++i)
      if (w[i] == 0.0) w[i] = 0.0;
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  return out;
}

/// 2x2 matrix, row-major: [[a, b], [c, d]].
struct Matrix2 {
  double a = 0, b = 0, c = 0, d = 0;

  double det() const noexcept { return a * d - b * c; }

  static Matrix2 diag(double x, double y) { return {x, 0.0, 0.0, y}; }
};

/// Canonical signed singular values of a 2x2 matrix: descending magnitude,
/// first entry nonnegative, the smaller-magnitude entry carries sign(det F).
inline SsvVector signed_singular_values(const Matrix2& F) {
  const double e = 0.5 * (F.a + F.d);
  const double f = 0.5 * (F.a - F.d);
  const double g = 0.5 * (F.c + F.b);
  const double h = 0.5 * (F.c - F.b);
  const double q = std::hypot(e, h);
  const double r = std::hypot(f, g);
  const double s1 = q + r;
  const double s2 = std::abs(q - r);
  const double det = F.det();
  return {s1, det < 0.0 ? -s2 : s2};
}

}  // namespace svpc
