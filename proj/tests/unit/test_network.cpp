#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "svpc/picnn/adamax.hpp"
#include "svpc/picnn/checkpoint.hpp"
#include "svpc/picnn/loss.hpp"
#include "svpc/picnn/network.hpp"
#include "svpc/picnn/train.hpp"

using namespace svpc;
using namespace svpc::nn;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void midpoint_check(const NetworkParams& p, std::span<const double> zeta, std::uint64_t seed,
                    int pairs) {
  std::mt19937_64 rng(seed);
  const std::size_t K = p.arch().input_size;
  double worst = 0.0;
  for (int t = 0; t < pairs; ++t) {
    const auto x = random_vec(rng, K, -2, 2);
    const auto y = random_vec(rng, K, -2, 2);
    std::vector<double> mid(K);
    for (std::size_t i = 0; i < K; ++i) mid[i] = 0.5 * (x[i] + y[i]);
    const double slack =
        0.5 * (forward(p, x, zeta) + forward(p, y, zeta)) - forward(p, mid, zeta);
    worst = std::min(worst, slack);
  }
  EXPECT_GE(worst, -1e-9);
}

// Every ReLU, gate and penalty argument at least tol away from its kink.
bool away_from_kinks(const NetworkParams& p, const ForwardCache& c, double tol) {
  const std::size_t k = p.arch().layers();
  for (std::size_t i = 0; i + 1 < k; ++i) {
    for (double x : c.pre[i])
      if (std::abs(x) < tol) return false;
    if (p.arch().variant == Variant::picnn)
      for (double x : c.zeta_path.upre[i])
        if (std::abs(x) < tol) return false;
  }
  if (p.arch().variant == Variant::picnn)
    for (std::size_t i = 1; i < k; ++i)
      for (double x : c.zeta_path.gz_pre[i])
        if (std::abs(x) < tol) return false;
  return true;
}

LearningSet random_set(std::mt19937_64& rng, int d, std::size_t p, std::size_t n) {
  LearningSet s;
  s.minors_size = static_cast<std::size_t>(minors_count(d));
  s.zeta_size = p;
  std::uniform_real_distribution<double> u(-1.2, 1.2), z(0.5, 2.0), t(0.0, 3.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> nu(static_cast<std::size_t>(d));
    for (auto& x : nu) x = u(rng);
    const MinorsVector m = minors(SsvVector(std::span<const double>(nu)));
    std::vector<double> zeta(p);
    for (auto& x : zeta) x = z(rng);
    s.add(m.values(), zeta, t(rng), t(rng));
  }
  return s;
}

// Zero the weights on nu_1 and nu_2 so the network reads only the
// determinant, which is group invariant.
void determinant_only(NetworkParams& p) {
  for (std::size_t i = 0; i < p.arch().layers(); ++i) {
    auto& wm = p.at(p.slots(i).Wm);
    for (std::size_t r = 0; r < wm.rows; ++r) wm.row(r)[0] = wm.row(r)[1] = 0.0;
  }
}

}  // namespace

TEST(Ficnn, HandEvaluatedExample) {
  NetworkParams p(Architecture::ficnn(2, {3}));
  auto& wm = p.find("layer0.W_m");
  for (std::size_t i = 0; i < 3; ++i) wm.row(i)[i] = 1.0;
  auto& wz = p.find("layer1.W_z");
  std::fill(wz.data.begin(), wz.data.end(), 1.0);
  const std::vector<double> m{1, -2, 3};
  EXPECT_EQ(forward(p, m), 4.0);
}

TEST(Ficnn, DegenerateNetworkIsSmallAndPositive) {
  NetworkParams p(Architecture::ficnn(2, {4, 4}));
  for (auto& t : p.tensors())
    if (t.name.find(".W") != std::string::npos) std::fill(t.data.begin(), t.data.end(), kProjectionEps);
  const std::vector<double> m{0.5, 0.7, 0.35};
  const double f = forward(p, m);
  // The output layer sees the minors directly, so the value is
  // eps * sum(m) plus higher-order terms.
  EXPECT_GT(f, 0.0);
  EXPECT_NEAR(f, kProjectionEps * 1.55, 1e-10);
}

TEST(Ficnn, ShapeMismatch) {
  const auto p = init_params(Architecture::ficnn(2, {4}), 1);
  const std::vector<double> bad{1, 2};
  EXPECT_THROW(forward(p, bad), ShapeError);
  const std::vector<double> m{1, 2, 2}, z{1};
  EXPECT_THROW(forward(p, m, z), ShapeError);
}

TEST(Architecture, Validation) {
  EXPECT_THROW(NetworkParams(Architecture::ficnn(2, {})), SpecError);
  EXPECT_THROW(NetworkParams(Architecture::picnn(2, 0, {3}, {3})), SpecError);
  EXPECT_THROW(NetworkParams(Architecture::picnn(2, 1, {3, 4}, {3})), SpecError);
  EXPECT_EQ(Architecture::ficnn(3, {5}).input_size, 7u);
}

TEST(Init, DeterministicProjectedAndZeroBias) {
  const auto arch = Architecture::picnn(2, 2, {10, 20, 20}, {10, 20, 20});
  const auto a = init_params(arch, 42);
  const auto b = init_params(arch, 42);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == init_params(arch, 43));
  for (const auto& t : a.tensors()) {
    if (t.convex) {
      for (double x : t.data) EXPECT_GE(x, kProjectionEps);
    }
    if (t.cols == 1) {
      for (double x : t.data) EXPECT_EQ(x, 0.0) << t.name;
    }
  }
}

TEST(Init, FractionClampedMatchesNormalCdf) {
  const auto p = init_params(Architecture::ficnn(2, {100, 100}), 7);
  auto q = p;
  const auto& wz = q.find("layer1.W_z");
  ASSERT_TRUE(wz.convex);
  ASSERT_EQ(wz.data.size(), 10000u);
  std::size_t at_eps = 0;
  for (double x : wz.data) at_eps += x == kProjectionEps;
  const double frac = static_cast<double>(at_eps) / 1e4;
  EXPECT_NEAR(frac, 0.15865525393145707, 0.03);
}

TEST(Projection, Examples) {
  NetworkParams p(Architecture::ficnn(2, {1}));
  auto& wz = p.find("layer1.W_z");
  auto& wm = p.find("layer0.W_m");
  wz.data[0] = -0.3;
  wm.data[0] = -0.3;
  project_weights(p);
  EXPECT_EQ(wz.data[0], 1e-6);
  EXPECT_EQ(wm.data[0], -0.3);
  wz.data[0] = 0.7;
  project_weights(p);
  EXPECT_EQ(wz.data[0], 0.7 + 1e-6);
  project_weights(p);
  EXPECT_EQ(wz.data[0], 0.7 + 1e-6 + 1e-6);
}

TEST(Convexity, RandomFicnnIsMidpointConvex) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = init_params(Architecture::ficnn(2, {10, 20}), seed);
    midpoint_check(p, {}, seed + 100, 10000);
  }
  midpoint_check(init_params(Architecture::ficnn(3, {8, 8}), 9), {}, 5, 10000);
}

TEST(Convexity, RandomPicnnIsMidpointConvexAtFixedZeta) {
  const auto p = init_params(Architecture::picnn(2, 2, {10, 20, 20}, {10, 20, 20}), 11);
  std::mt19937_64 rng(12);
  for (int k = 0; k < 5; ++k) {
    const auto zeta = random_vec(rng, 2, -2, 3);
    midpoint_check(p, zeta, 200 + static_cast<std::uint64_t>(k), 10000);
  }
}

// The parameter path carries no convexity guarantee; random search finds a
// violation of the midpoint inequality in zeta.
TEST(Convexity, PicnnIsNotConvexInZeta) {
  bool found = false;
  std::mt19937_64 rng(21);
  for (std::uint64_t seed = 0; seed < 50 && !found; ++seed) {
    const auto p = init_params(Architecture::picnn(2, 1, {10, 20}, {10, 20}), seed);
    for (int t = 0; t < 200 && !found; ++t) {
      const auto m = random_vec(rng, 3, -2, 2);
      const auto z = random_vec(rng, 2, -3, 3);
      const std::vector<double> z1{z[0]}, z2{z[1]}, zm{0.5 * (z[0] + z[1])};
      const double gap = 0.5 * (forward(p, m, z1) + forward(p, m, z2)) - forward(p, m, zm);
      found = gap < -1e-6;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Picnn, ReducesToFicnnWithSaturatedGates) {
  auto f = init_params(Architecture::ficnn(2, {6, 7}), 3);
  auto p = init_params(Architecture::picnn(2, 2, {6, 7}, {4, 5}), 4);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto pre = "layer" + std::to_string(i) + ".";
    p.find(pre + "W_m").data = f.at(f.slots(i).Wm).data;
    p.find(pre + "b").data = f.at(f.slots(i).b).data;
    std::fill(p.find(pre + "W_u").data.begin(), p.find(pre + "W_u").data.end(), 0.0);
    std::fill(p.find(pre + "W_mu").data.begin(), p.find(pre + "W_mu").data.end(), 0.0);
    std::fill(p.find(pre + "b_m").data.begin(), p.find(pre + "b_m").data.end(), 1.0);
    if (i > 0) {
      p.find(pre + "W_z").data = f.at(f.slots(i).Wz).data;
      std::fill(p.find(pre + "W_zu").data.begin(), p.find(pre + "W_zu").data.end(), 0.0);
      std::fill(p.find(pre + "b_z").data.begin(), p.find(pre + "b_z").data.end(), 1.0);
    }
  }
  std::mt19937_64 rng(5);
  for (int t = 0; t < 1000; ++t) {
    const auto m = random_vec(rng, 3, -2, 2);
    const auto z = random_vec(rng, 2, -2, 2);
    EXPECT_NEAR(forward(p, m, z), forward(f, m), 1e-12);
  }
}

TEST(Loss, Examples) {
  const std::vector<double> one{1.0};
  auto l = loss(std::vector<double>{2.0}, one, std::vector<double>{1.5}, {}, 1.5, 0.0);
  EXPECT_DOUBLE_EQ(l.mse, 1.0);
  EXPECT_DOUBLE_EQ(l.ineq, 0.25);
  EXPECT_DOUBLE_EQ(l.total, 1.375);
  // Orbit predictions (1, 1, 3) for a sample predicted at 1.
  l = loss(one, one, one, std::vector<double>{1, 1, 3}, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(l.sym, 4.0 / 3.0);
  l = loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}, std::vector<double>{1, 5},
           std::vector<double>{1, 1, 1, 2, 2, 2}, 3.0, 7.0);
  EXPECT_EQ(l.total, 0.0);
  EXPECT_THROW(loss(one, std::vector<double>{1, 2}, one, {}, 0, 0), ShapeError);
}

TEST(Loss, DecompositionOnBatches) {
  std::mt19937_64 rng(3);
  const auto set = random_set(rng, 2, 0, 64);
  const auto orb = orbit_minors(set);
  const auto p = init_params(Architecture::ficnn(2, {5, 5}), 1);
  NetworkParams g(p.arch());
  BatchGradient bg(set, orb);
  std::vector<std::size_t> idx(32);
  std::iota(idx.begin(), idx.end(), std::size_t{3});
  const auto parts = bg(p, idx, 1.5, 0.7, g);
  EXPECT_NEAR(parts.total, parts.mse + 1.5 * parts.ineq + 0.7 * parts.sym, 1e-12);
}

class GradientCheck : public ::testing::TestWithParam<Variant> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const Variant variant = GetParam();
  std::mt19937_64 rng(variant == Variant::ficnn ? 31 : 32);
  int done = 0;
  for (std::uint64_t seed = 0; done < 20 && seed < 500; ++seed) {
    const auto arch = variant == Variant::ficnn ? Architecture::ficnn(2, {4, 5})
                                                : Architecture::picnn(2, 2, {4, 5}, {3, 4});
    auto p = init_params(arch, seed);
    // Nonzero biases keep the test generic.
    for (auto& t : p.tensors())
      if (t.cols == 1)
        for (auto& x : t.data) x = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
    auto set = random_set(rng, 2, arch.zeta_size, 6);
    const auto orb = orbit_minors(set);
    // Reject configurations near a kink of any ReLU, gate or penalty.
    bool ok = true;
    for (std::size_t i = 0; i < set.size() && ok; ++i) {
      ForwardCache c;
      const double pred = forward(p, set.m_row(i), set.zeta_row(i), c);
      ok = away_from_kinks(p, c, 1e-3) && std::abs(pred - set.phi[i]) > 1e-3;
      for (std::size_t j = 0; j < 3 && ok; ++j) {
        forward(p, std::span<const double>(orb).subspan((i * 3 + j) * 3, 3), set.zeta_row(i), c);
        ok = away_from_kinks(p, c, 1e-3);
      }
    }
    if (!ok) continue;
    ++done;
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    BatchGradient bg(set, orb);
    NetworkParams grad(arch), scratch(arch);
    bg(p, idx, 1.5, 1.0, grad);
    double max_err = 0.0, max_ref = 0.0;
    const double h = 1e-5;
    for (std::size_t k = 0; k < p.tensors().size(); ++k) {
      for (std::size_t e = 0; e < p.tensors()[k].data.size(); ++e) {
        double& w = p.tensors()[k].data[e];
        const double w0 = w;
        w = w0 + h;
        const double lp = bg(p, idx, 1.5, 1.0, scratch).total;
        w = w0 - h;
        const double lm = bg(p, idx, 1.5, 1.0, scratch).total;
        w = w0;
        const double fd = (lp - lm) / (2 * h);
        max_err = std::max(max_err, std::abs(fd - grad.tensors()[k].data[e]));
        max_ref = std::max(max_ref, std::abs(fd));
      }
    }
    EXPECT_LE(max_err, 1e-4 * max_ref) << "seed " << seed;
  }
  EXPECT_EQ(done, 20);
}

INSTANTIATE_TEST_SUITE_P(Variants, GradientCheck,
                         ::testing::Values(Variant::ficnn, Variant::picnn),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Gradient, ZeroLossGivesZeroGradient) {
  auto p = init_params(Architecture::ficnn(2, {4}), 2);
  determinant_only(p);
  std::mt19937_64 rng(4);
  auto set = random_set(rng, 2, 0, 16);
  for (std::size_t i = 0; i < set.size(); ++i) {
    set.target[i] = forward(p, set.m_row(i));
    set.phi[i] = set.target[i] + 0.5;
  }
  const auto orb = orbit_minors(set);
  BatchGradient bg(set, orb);
  NetworkParams g(p.arch());
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto parts = bg(p, idx, 1.5, 1.0, g);
  EXPECT_EQ(parts.total, 0.0);
  for (const auto& t : g.tensors())
    for (double x : t.data) EXPECT_EQ(x, 0.0);
}

TEST(Gradient, LinearInPenaltyWeight) {
  const auto p = init_params(Architecture::ficnn(2, {6}), 8);
  std::mt19937_64 rng(9);
  auto set = random_set(rng, 2, 0, 40);
  for (auto& f : set.phi) f = -1.0;  // every prediction violates the bound
  const auto orb = orbit_minors(set);
  BatchGradient bg(set, orb);
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  NetworkParams g0(p.arch()), g1(p.arch()), g2(p.arch());
  bg(p, idx, 0.0, 0.5, g0);
  bg(p, idx, 1.0, 0.5, g1);
  bg(p, idx, 2.0, 0.5, g2);
  for (std::size_t k = 0; k < g0.tensors().size(); ++k)
    for (std::size_t e = 0; e < g0.tensors()[k].data.size(); ++e) {
      const double a = g1.tensors()[k].data[e] - g0.tensors()[k].data[e];
      const double b = g2.tensors()[k].data[e] - g0.tensors()[k].data[e];
      EXPECT_NEAR(b, 2 * a, 1e-10 * std::max(1.0, std::abs(b)));
    }
}

TEST(Adamax, ZeroGradientLeavesParameters) {
  auto p = init_params(Architecture::ficnn(2, {3}), 1);
  const auto before = p;
  AdamaxState s(p);
  NetworkParams g(p.arch());
  adamax_step(s, p, g, 1e-3);
  EXPECT_EQ(p, before);
}

TEST(Adamax, ConstantGradientStepTendsToLearningRate) {
  auto p = init_params(Architecture::ficnn(2, {3}), 1);
  AdamaxState s(p);
  NetworkParams g(p.arch());
  g.fill(0.25);
  for (int t = 0; t < 500; ++t) {
    const auto before = p;
    adamax_step(s, p, g, 1e-3);
    if (t < 499) continue;
    for (std::size_t k = 0; k < p.tensors().size(); ++k)
      for (std::size_t e = 0; e < p.tensors()[k].data.size(); ++e)
        EXPECT_NEAR(before.tensors()[k].data[e] - p.tensors()[k].data[e], 1e-3, 1e-9);
  }
}

TEST(Adamax, Deterministic) {
  const auto p0 = init_params(Architecture::ficnn(2, {3}), 1);
  NetworkParams g(p0.arch());
  g.fill(-0.1);
  auto a = p0, b = p0;
  AdamaxState sa(a), sb(b);
  for (int t = 0; t < 10; ++t) {
    adamax_step(sa, a, g, 1e-2);
    adamax_step(sb, b, g, 1e-2);
  }
  EXPECT_EQ(a, b);
}

TEST(Symmetrize, ExactlyInvariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const auto p = init_params(Architecture::ficnn(2, {10, 20}), 5);
  const auto q = init_params(Architecture::picnn(2, 1, {5}, {5}), 5);
  const std::vector<double> z{0.3};
  for (int t = 0; t < 200; ++t) {
    const SsvVector v{u(rng), u(rng)};
    const double s = symmetrize_prediction(p, v);
    const double sq = symmetrize_prediction(q, v, z);
    double manual = 0.0;
    for (const auto& g : symmetry_group(2)) {
      EXPECT_NEAR(symmetrize_prediction(p, g(v)), s, 1e-12);
      EXPECT_NEAR(symmetrize_prediction(q, g(v), z), sq, 1e-12);
      manual += predict(p, g(v));
    }
    EXPECT_NEAR(manual / 4.0, s, 1e-12);
  }
}

TEST(Symmetrize, SymmetricNetworkUnchanged) {
  auto p = init_params(Architecture::ficnn(2, {4}), 2);
  determinant_only(p);
  const SsvVector v{0.4, -1.1};
  EXPECT_NEAR(symmetrize_prediction(p, v), predict(p, v), 1e-12);
}

TEST(Ensemble, MeanAndSampleStd) {
  NetworkParams a(Architecture::ficnn(2, {2})), b(a.arch());
  a.find("layer1.b").data[0] = 1.0;
  b.find("layer1.b").data[0] = 3.0;
  const std::vector<NetworkParams> two{a, b};
  const auto r = ensemble_predict(two, {0.2, 0.3});
  EXPECT_DOUBLE_EQ(r.mean, 2.0);
  EXPECT_DOUBLE_EQ(r.std, std::sqrt(2.0));
  const std::vector<NetworkParams> one{a};
  EXPECT_EQ(ensemble_predict(one, {0.2, 0.3}).std, 0.0);
  const std::vector<NetworkParams> same{b, b, b};
  EXPECT_EQ(ensemble_predict(same, {0.2, 0.3}).std, 0.0);
  EXPECT_THROW(ensemble_predict(std::span<const NetworkParams>{}, {0.2, 0.3}), SpecError);
}

TEST(Training, StopsAfterPlateau) {
  std::mt19937_64 rng(1);
  const auto tr = random_set(rng, 2, 0, 50);
  // Validation points at the origin with target 0: with zero initial biases
  // and a negligible step the validation loss stays at 0 from epoch 1.
  LearningSet va;
  for (int i = 0; i < 20; ++i) va.add(std::vector<double>{0, 0, 0}, {}, 0.0, 1.0);
  TrainConfig cfg;
  cfg.learning_rate = 1e-300;
  cfg.patience = 4;
  cfg.max_epochs = 100;
  const auto r = train(tr, va, Architecture::ficnn(2, {4}), cfg);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.best_epoch, 1u);
  EXPECT_LE(r.history.size(), cfg.patience + 1);
}

TEST(Training, DeterministicAndReportsAllComponents) {
  std::mt19937_64 rng(2);
  const auto tr = random_set(rng, 2, 1, 100);
  const auto va = random_set(rng, 2, 1, 30);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.batch_size = 16;
  cfg.seed = 77;
  const auto arch = Architecture::picnn(2, 1, {4, 4}, {3, 3});
  const auto a = train(tr, va, arch, cfg);
  const auto b = train(tr, va, arch, cfg);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.history.size(), 5u);
  for (std::size_t e = 0; e < 5; ++e) {
    EXPECT_EQ(a.history[e].validation.total, b.history[e].validation.total);
    EXPECT_EQ(a.history[e].train.total, a.history[e].train.mse);  // no penalties
    EXPECT_GT(a.history[e].train.sym, 0.0);
  }
  for (const auto& t : a.params.tensors()) {
    if (!t.convex) continue;
    for (double x : t.data) EXPECT_GE(x, kProjectionEps);
  }
}

TEST(Training, LossDecreasesOnASmoothTarget) {
  LearningSet tr, va;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 600; ++i) {
    const SsvVector v{u(rng), u(rng)};
    const double f = v.squared_norm() + v.product() * v.product();
    (i % 5 == 0 ? va : tr).add(minors(v).values(), {}, f, f + 1.0);
  }
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  const auto r = train(tr, va, Architecture::ficnn(2, {10, 10}), cfg);
  EXPECT_LT(r.history.back().validation.total, 0.2 * r.history.front().validation.total);
}

TEST(Training, RejectsEmptyPartitions) {
  LearningSet empty;
  std::mt19937_64 rng(1);
  const auto s = random_set(rng, 2, 0, 5);
  EXPECT_THROW(train(s, empty, Architecture::ficnn(2, {2}), TrainConfig{}), ShapeError);
}

TEST(Checkpoint, RoundTrip) {
  std::mt19937_64 rng(2);
  const auto tr = random_set(rng, 2, 2, 40);
  const auto va = random_set(rng, 2, 2, 10);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto r = train(tr, va, Architecture::picnn(2, 2, {3, 3}, {2, 2}), cfg);
  Checkpoint c{r.params, cfg, r.history, r.best_epoch, json{{"note", "x"}}};
  const auto path = std::filesystem::temp_directory_path() / "svpc_ckpt_roundtrip.json";
  save_checkpoint(c, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.params, c.params);
  ASSERT_EQ(back.history.size(), c.history.size());
  EXPECT_EQ(back.history[1].validation.total, c.history[1].validation.total);
  EXPECT_EQ(back.config->seed, cfg.seed);
  EXPECT_EQ(back.extra, c.extra);
  std::filesystem::remove(path);
  EXPECT_THROW(checkpoint_from_json(json{{"format", "other"}}), SpecError);
}
