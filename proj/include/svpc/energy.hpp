#pragma once

// Energy densities in signed-singular-value form: the Kohn-Strang-Dolzmann
// benchmark (plain and generalised) with their analytic polyconvex envelopes,
// Saint Venant-Kirchhoff and neo-Hookean stored energies, and the normalised
// incremental isotropic damage density built on top of them.

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svpc/errors.hpp"
#include "svpc/ssv.hpp"

namespace svpc {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline void require_dimension_2(const SsvVector& v) {
  if (v.dim() != 2)
    throw DimensionError("density defined for d = 2 only, got d = " +
                         std::to_string(v.dim()));
}

// ---------------------------------------------------------------------------
// Kohn-Strang-Dolzmann

inline double ksd_phi(const SsvVector& v) {
  require_dimension_2(v);
  const double r2 = v[0] * v[0] + v[1] * v[1];
  const double r = std::sqrt(r2);
  if (r >= std::numbers::sqrt2 - 1.0) return 1.0 + r2;
  return 2.0 * std::numbers::sqrt2 * r;
}

inline double ksd_phi_pc(const SsvVector& v) {
  require_dimension_2(v);
  const double rho = std::abs(v[0]) + std::abs(v[1]);
  if (rho >= 1.0) return 1.0 + (v[0] * v[0] + v[1] * v[1]);
  return 2.0 * (rho - std::abs(v[0] * v[1]));
}

inline void require_gksd_params(double lam, double alp) {
  if (!(alp > 0.0))
    throw ParameterError("generalised KSD requires alpha > 0, got " + std::to_string(alp));
  if (!(lam >= 0.0))
    throw ParameterError("generalised KSD requires lambda >= 0, got " + std::to_string(lam));
}

inline double gksd_phi(const SsvVector& v, double lam, double alp) {
  require_dimension_2(v);
  require_gksd_params(lam, alp);
  const double r2 = v[0] * v[0] + v[1] * v[1];
  const double r = std::sqrt(r2);
  if (r >= std::sqrt(lam / alp) * (std::numbers::sqrt2 - 1.0)) return lam + alp * r2;
  return 2.0 * std::sqrt(2.0 * lam * alp) * r;
}

inline double gksd_phi_pc(const SsvVector& v, double lam, double alp) {
  require_dimension_2(v);
  require_gksd_params(lam, alp);
  const double rho = std::abs(v[0]) + std::abs(v[1]);
  if (rho >= std::sqrt(lam / alp)) return lam + alp * (v[0] * v[0] + v[1] * v[1]);
  return 2.0 * std::sqrt(lam * alp) * rho - 2.0 * alp * std::abs(v[0] * v[1]);
}

// ---------------------------------------------------------------------------
// Stored energies and damage

struct MaterialParams {
  double mu = 0.5;
  double lambda = 0.0;
  double d0 = 0.5;       ///< damage saturation
  double d_inf = 0.99;   ///< asymptotic damage limit
  double alpha_inf = 4.0;

  void validate() const {
    if (!(d_inf > 0.0 && d_inf < 1.0))
      throw ParameterError("d_inf must lie in (0, 1)");
    if (!(d0 > 0.0)) throw ParameterError("d0 must be positive");
    if (!(alpha_inf > 0.0)) throw ParameterError("alpha_inf must be positive");
  }
};

enum class BaseDensity { stvk, nh };

/// Saint Venant-Kirchhoff energy of diag(v).
inline double stvk_phi0(const SsvVector& v, const MaterialParams& mp) {
  require_dimension(v.dim());
  double dev = 0.0;
  double trace = 0.0;
  for (int i = 0; i < v.dim(); ++i) {
    const double s = v[i] * v[i];
    dev += (s - 1.0) * (s - 1.0);
    trace += s;
  }
  const double t = trace - v.dim();
  return 0.25 * mp.mu * dev + 0.125 * mp.lambda * t * t;
}

/// Compressible neo-Hookean energy of diag(v); +inf for nonpositive determinant.
inline double nh_phi0(const SsvVector& v, const MaterialParams& mp) {
  require_dimension(v.dim());
  const double det = v.product();
  if (!(det > 0.0)) return kInfinity;
  const double log_det = std::log(det);
  return 0.5 * mp.mu * (v.squared_norm() - v.dim()) - mp.mu * log_det +
         0.5 * mp.lambda * log_det * log_det;
}

inline double base_phi0(const SsvVector& v, const MaterialParams& mp, BaseDensity base) {
  return base == BaseDensity::stvk ? stvk_phi0(v, mp) : nh_phi0(v, mp);
}

inline void require_alpha(double alpha) {
  if (!(alpha >= 0.0))
    throw DomainError("internal variable must be nonnegative, got " + std::to_string(alpha));
}

/// D(alpha) = d_inf (1 - exp(-alpha / d0)).
inline double damage_D(double alpha, const MaterialParams& mp) {
  require_alpha(alpha);
  return mp.d_inf * -std::expm1(-alpha / mp.d0);
}

/// Antiderivative of D: d_inf (alpha + d0 exp(-alpha / d0)).
inline double damage_Dbar(double alpha, const MaterialParams& mp) {
  require_alpha(alpha);
  return mp.d_inf * (alpha + mp.d0 * std::exp(-alpha / mp.d0));
}

/// Next internal variable: max(phi0(v), alpha_k).
inline double path_p(const SsvVector& v, double alpha_k, const MaterialParams& mp,
                     BaseDensity base) {
  require_alpha(alpha_k);
  const double e = base_phi0(v, mp, base);
  return e > alpha_k ? e : alpha_k;
}

/// Damaged stored energy (1 - D(alpha)) phi0(v).
inline double damaged_phi(const SsvVector& v, double alpha, const MaterialParams& mp,
                          BaseDensity base) {
  const double e = base_phi0(v, mp, base);
  if (std::isinf(e)) return e;
  return (1.0 - damage_D(alpha, mp)) * e;
}

/// Normalised incremental density; vanishes at the identity stretch.
inline double phi_tilde(const SsvVector& v, double alpha_k, const MaterialParams& mp,
                        BaseDensity base) {
  const double p = path_p(v, alpha_k, mp, base);
  if (std::isinf(p)) return kInfinity;
  return damaged_phi(v, p, mp, base) + p * damage_D(p, mp) -
         alpha_k * damage_D(alpha_k, mp) - damage_Dbar(p, mp) +
         damage_Dbar(alpha_k, mp);
}

/// Previous-step contribution, constant in the current stretch.
inline double phi_shift(const SsvVector& nu_k, double alpha_k, const MaterialParams& mp,
                        BaseDensity base) {
  return -damaged_phi(nu_k, alpha_k, mp, base);
}

// ---------------------------------------------------------------------------
// Model selection

enum class ModelKind { ksd, gksd, stvk_damage, nh_damage };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ksd: return "ksd";
    case ModelKind::gksd: return "gksd";
    case ModelKind::stvk_damage: return "stvk_damage";
    case ModelKind::nh_damage: return "nh_damage";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(std::string_view s) {
  if (s == "ksd") return ModelKind::ksd;
  if (s == "gksd") return ModelKind::gksd;
  if (s == "stvk_damage") return ModelKind::stvk_damage;
  if (s == "nh_damage") return ModelKind::nh_damage;
  throw SpecError("unknown model kind '" + std::string(s) +
                  "' (expected ksd, gksd, stvk_damage, nh_damage)");
}

/// A density Phi(v; zeta) with its parameter arity and, where known, its
/// analytic envelope. Damage models evaluate the normalised density; the
/// previous-step shift is applied separately.
class EnergyModel {
 public:
  explicit EnergyModel(ModelKind kind = ModelKind::ksd, MaterialParams params = {})
      : kind_(kind), params_(params) {
    if (is_damage()) params_.validate();
  }

  static EnergyModel ksd() { return EnergyModel(ModelKind::ksd); }
  static EnergyModel gksd() { return EnergyModel(ModelKind::gksd); }
  static EnergyModel stvk_damage(const MaterialParams& mp = {}) {
    return EnergyModel(ModelKind::stvk_damage, mp);
  }
  static EnergyModel nh_damage(const MaterialParams& mp = {}) {
    return EnergyModel(ModelKind::nh_damage, mp);
  }

  ModelKind kind() const noexcept { return kind_; }
  std::string id() const { return std::string(to_string(kind_)); }
  const MaterialParams& params() const noexcept { return params_; }
  bool is_damage() const noexcept {
    return kind_ == ModelKind::stvk_damage || kind_ == ModelKind::nh_damage;
  }
  BaseDensity base() const noexcept {
    return kind_ == ModelKind::nh_damage ? BaseDensity::nh : BaseDensity::stvk;
  }

  /// Length of the parameter vector zeta.
  std::size_t arity() const noexcept {
    switch (kind_) {
      case ModelKind::ksd: return 0;
      case ModelKind::gksd: return 2;
      default: return 1;
    }
  }

  bool has_analytic_envelope() const noexcept {
    return kind_ == ModelKind::ksd || kind_ == ModelKind::gksd;
  }

  void check_zeta(std::span<const double> zeta) const {
    if (zeta.size() != arity())
      throw ParameterError("model " + id() + " expects " + std::to_string(arity()) +
                           " parameters, got " + std::to_string(zeta.size()));
  }

  double phi(const SsvVector& v, std::span<const double> zeta = {}) const {
    check_zeta(zeta);
    switch (kind_) {
      case ModelKind::ksd: return ksd_phi(v);
      case ModelKind::gksd: return gksd_phi(v, zeta[0], zeta[1]);
      default: return phi_tilde(v, zeta[0], params_, base());
    }
  }

  double phi_pc(const SsvVector& v, std::span<const double> zeta = {}) const {
    check_zeta(zeta);
    switch (kind_) {
      case ModelKind::ksd: return ksd_phi_pc(v);
      case ModelKind::gksd: return gksd_phi_pc(v, zeta[0], zeta[1]);
      default:
        throw SpecError("model " + id() + " has no analytic envelope");
    }
  }

  /// Parameter vector used for network inference; damage models clamp
  /// alpha_k to alpha_inf, beyond which the density is saturated.
  std::vector<double> inference_zeta(std::span<const double> zeta) const {
    std::vector<double> z(zeta.begin(), zeta.end());
    if (is_damage() && !z.empty() && z[0] > params_.alpha_inf) z[0] = params_.alpha_inf;
    return z;
  }

 private:
  ModelKind kind_;
  MaterialParams params_;
};

}  // namespace svpc
