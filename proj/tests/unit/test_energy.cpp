#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "svpc/energy.hpp"

using namespace svpc;

namespace {

// Direct evaluation of the incremental damage density from its definition,
// written independently of phi_tilde / phi_shift.
double incremental_density_oracle(const SsvVector& v1, const SsvVector& v0, double a,
                                  const MaterialParams& mp, BaseDensity base) {
  auto psi0 = [&](const SsvVector& v) {
    if (base == BaseDensity::stvk) {
      double s = 0, t = 0;
      for (int i = 0; i < v.dim(); ++i) {
        s += std::pow(v[i] * v[i] - 1.0, 2);
        t += v[i] * v[i];
      }
      return mp.mu / 4 * s + mp.lambda / 8 * std::pow(t - v.dim(), 2);
    }
    double det = 1, t = 0;
    for (int i = 0; i < v.dim(); ++i) {
      det *= v[i];
      t += v[i] * v[i];
    }
    return mp.mu / 2 * (t - v.dim()) - mp.mu * std::log(det) +
           mp.lambda / 2 * std::pow(std::log(det), 2);
  };
  auto D = [&](double x) { return mp.d_inf * (1 - std::exp(-x / mp.d0)); };
  auto Dbar = [&](double x) { return mp.d_inf * (x + mp.d0 * std::exp(-x / mp.d0)); };
  const double e1 = psi0(v1);
  const double p = e1 > a ? e1 : a;
  return (1 - D(p)) * e1 - (1 - D(a)) * psi0(v0) + p * D(p) - a * D(a) - Dbar(p) + Dbar(a);
}

const MaterialParams kStvk{0.5, 0.0, 0.5, 0.99, 4.0};

}  // namespace

TEST(Ksd, Examples) {
  EXPECT_EQ(ksd_phi({0, 0}), 0.0);
  EXPECT_EQ(ksd_phi({1, 0}), 2.0);
  EXPECT_NEAR(ksd_phi({0.2, 0}), 0.5656854249492381, 1e-15);
  EXPECT_EQ(ksd_phi_pc({0.5, 0}), 1.0);
  EXPECT_EQ(ksd_phi_pc({1, 1}), 3.0);
  EXPECT_EQ(ksd_phi_pc({0, 0}), 0.0);
}

TEST(Ksd, ContinuousAcrossBranchThreshold) {
  const double r = std::sqrt(2.0) - 1.0;
  EXPECT_NEAR(ksd_phi({r - 1e-12, 0}), ksd_phi({r + 1e-12, 0}), 1e-10);
  EXPECT_NEAR(ksd_phi_pc({1 - 1e-12, 0}), ksd_phi_pc({1 + 1e-12, 0}), 1e-10);
}

TEST(Gksd, Examples) {
  EXPECT_EQ(gksd_phi_pc({0, 0}, 1.7, 1.3), 0.0);
  EXPECT_NEAR(gksd_phi_pc({1, 1}, 1.7, 1.3), 4.3, 1e-14);
  EXPECT_THROW(gksd_phi({0, 0}, 1.0, 0.0), ParameterError);
  EXPECT_THROW(gksd_phi_pc({0, 0}, 1.0, 0.0), ParameterError);
}

TEST(Gksd, UnitParametersReduceToKsd) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const SsvVector v{u(rng), u(rng)};
    worst = std::max(worst, std::abs(gksd_phi(v, 1, 1) - ksd_phi(v)));
    worst = std::max(worst, std::abs(gksd_phi_pc(v, 1, 1) - ksd_phi_pc(v)));
  }
  EXPECT_LE(worst, 1e-14);
}

TEST(AnalyticEnvelopes, LieBelowTheirDensities) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.5, 1.5), par(0.5, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const SsvVector v{u(rng), u(rng)};
    EXPECT_GE(ksd_phi(v) - ksd_phi_pc(v), -1e-12);
    const double lam = par(rng), alp = par(rng);
    EXPECT_GE(gksd_phi(v, lam, alp) - gksd_phi_pc(v, lam, alp), -1e-12);
  }
}

TEST(StoredEnergies, Examples) {
  const MaterialParams mp = kStvk;
  EXPECT_EQ(stvk_phi0({1, 1}, mp), 0.0);
  EXPECT_EQ(stvk_phi0({2, 1}, mp), 1.125);
  EXPECT_EQ(stvk_phi0({-1, -1}, mp), 0.0);
  EXPECT_EQ(nh_phi0({1, 1}, mp), 0.0);
  EXPECT_NEAR(nh_phi0({2, 1}, mp), 0.40342640972002736, 1e-15);
  EXPECT_TRUE(std::isinf(nh_phi0({-1, 1}, mp)));
  EXPECT_TRUE(std::isinf(nh_phi0({0, 1}, mp)));
  EXPECT_EQ(stvk_phi0({1, 1, 1}, mp), 0.0);
}

TEST(Damage, Examples) {
  const MaterialParams mp = kStvk;
  EXPECT_EQ(damage_D(0, mp), 0.0);
  EXPECT_NEAR(damage_D(0.5, mp), 0.6257993532402721, 1e-15);
  EXPECT_NEAR(mp.d_inf - damage_D(4, mp), mp.d_inf * std::exp(-8.0), 1e-15);
  for (double a = 4; a <= 20; a += 0.5) EXPECT_LE(std::abs(damage_D(a, mp) - mp.d_inf), 3.4e-4);
  EXPECT_THROW(damage_D(-0.1, mp), DomainError);
  EXPECT_THROW(damage_Dbar(-0.1, mp), DomainError);
}

TEST(Damage, DbarIsAntiderivative) {
  const MaterialParams mp = kStvk;
  const double h = 1e-5;
  for (int k = 1; k <= 39; ++k) {
    const double a = 0.1 * k;
    const double fd = (damage_Dbar(a + h, mp) - damage_Dbar(a - h, mp)) / (2 * h);
    EXPECT_NEAR(fd, damage_D(a, mp), 1e-6) << "alpha = " << a;
  }
}

TEST(PathFunction, Branches) {
  const MaterialParams mp = kStvk;
  const SsvVector v{2, 1};  // phi0 = 1.125
  EXPECT_EQ(path_p(v, 2.0, mp, BaseDensity::stvk), 2.0);
  EXPECT_EQ(path_p(v, 0.5, mp, BaseDensity::stvk), 1.125);
  EXPECT_EQ(path_p({1, 1}, 0.37, mp, BaseDensity::stvk), 0.37);
  EXPECT_TRUE(std::isinf(path_p({-1, 1}, 0.37, mp, BaseDensity::nh)));
}

TEST(PathFunction, MonotoneInAlpha) {
  const MaterialParams mp = kStvk;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int i = 0; i < 200; ++i) {
    const SsvVector v{u(rng), u(rng)};
    const double e = stvk_phi0(v, mp);
    double prev = -1;
    for (double a = 0; a <= 6; a += 0.25) {
      const double p = path_p(v, a, mp, BaseDensity::stvk);
      EXPECT_GE(p, prev);
      EXPECT_GE(p, e);
      EXPECT_EQ(p == a, e <= a);
      prev = p;
    }
  }
}

TEST(PhiTilde, Examples) {
  const MaterialParams mp = kStvk;
  EXPECT_EQ(phi_tilde({1, 1}, 0.7, mp, BaseDensity::stvk), 0.0);
  EXPECT_NEAR(phi_tilde({2, 1}, 0.0, mp, BaseDensity::stvk), 0.4540773838418771, 1e-14);
  const double a4 = phi_tilde({2, 1}, 4.0, mp, BaseDensity::stvk);
  const double a6 = phi_tilde({2, 1}, 6.0, mp, BaseDensity::stvk);
  EXPECT_LE(std::abs(a4 - a6), 5e-4);
}

TEST(PhiTilde, NormalisedAtIdentity) {
  for (auto base : {BaseDensity::stvk, BaseDensity::nh})
    for (double a = 0; a <= 4.0; a += 0.5) EXPECT_NEAR(phi_tilde({1, 1}, a, kStvk, base), 0.0, 1e-12);
}

TEST(PhiShift, Examples) {
  const MaterialParams mp = kStvk;
  EXPECT_EQ(phi_shift({1, 1}, 0.3, mp, BaseDensity::stvk), 0.0);
  EXPECT_EQ(phi_shift({2, 1}, 0.0, mp, BaseDensity::stvk), -1.125);
}

TEST(PhiShift, SplitMatchesDirectDensity) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.05, 3.0), al(0.0, 5.0);
  for (auto base : {BaseDensity::stvk, BaseDensity::nh}) {
    for (int i = 0; i < 1000; ++i) {
      const SsvVector v1{u(rng), u(rng)};
      const SsvVector v0{u(rng), u(rng)};
      const double a = al(rng);
      const double split = phi_tilde(v1, a, kStvk, base) + phi_shift(v0, a, kStvk, base);
      const double direct = incremental_density_oracle(v1, v0, a, kStvk, base);
      EXPECT_NEAR(split, direct, 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST(PhiTilde, SaturatesBeyondAlphaInf) {
  const MaterialParams mp = kStvk;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  const double c = 2 * mp.d_inf * std::exp(-8.0);
  for (int i = 0; i < 500; ++i) {
    const SsvVector v{u(rng), u(rng)};
    const double e = stvk_phi0(v, mp);
    const double ref = phi_tilde(v, 4.0, mp, BaseDensity::stvk);
    for (double a = 4.0; a <= 10.0; a += 0.5)
      EXPECT_LE(std::abs(phi_tilde(v, a, mp, BaseDensity::stvk) - ref), c * (1 + e + a));
  }
}

TEST(Models, GroupInvariance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto group = symmetry_group(2);
  const std::vector<std::pair<EnergyModel, std::vector<double>>> models{
      {EnergyModel::ksd(), {}},
      {EnergyModel::gksd(), {1.7, 1.3}},
      {EnergyModel::stvk_damage(), {0.6}},
      {EnergyModel::nh_damage(), {0.6}}};
  for (const auto& [model, zeta] : models) {
    for (int i = 0; i < 1000; ++i) {
      const SsvVector v{u(rng), u(rng)};
      const double ref = model.phi(v, zeta);
      for (const auto& g : group) EXPECT_EQ(model.phi(g(v), zeta), ref) << model.id();
    }
  }
}

TEST(Models, ArityAndEnvelopeAvailability) {
  EXPECT_EQ(EnergyModel::ksd().arity(), 0u);
  EXPECT_EQ(EnergyModel::gksd().arity(), 2u);
  EXPECT_EQ(EnergyModel::stvk_damage().arity(), 1u);
  EXPECT_TRUE(EnergyModel::gksd().has_analytic_envelope());
  EXPECT_FALSE(EnergyModel::nh_damage().has_analytic_envelope());
  EXPECT_THROW(EnergyModel::nh_damage().phi_pc({1, 1}, std::vector<double>{0.1}), SpecError);
  EXPECT_THROW(EnergyModel::gksd().phi({1, 1}, std::vector<double>{1.0}), ParameterError);
  MaterialParams bad;
  bad.d_inf = 1.0;
  EXPECT_THROW(EnergyModel::stvk_damage(bad), ParameterError);
  EXPECT_EQ(model_kind_from_string("nh_damage"), ModelKind::nh_damage);
  EXPECT_THROW(model_kind_from_string("ogden"), SpecError);
}

TEST(Models, InferenceClampsAlpha) {
  const auto m = EnergyModel::stvk_damage();
  EXPECT_EQ(m.inference_zeta(std::vector<double>{6.0}), std::vector<double>{4.0});
  EXPECT_EQ(m.inference_zeta(std::vector<double>{2.5}), std::vector<double>{2.5});
  EXPECT_EQ(EnergyModel::gksd().inference_zeta(std::vector<double>{1, 2.1}),
            (std::vector<double>{1, 2.1}));
}
