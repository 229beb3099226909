#pragma once

// Mini-batch training with ADAMAX, weight projection after every step and
// early stopping on the validation loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <random>
#include <span>
#include <vector>

#include "svpc/errors.hpp"
#include "svpc/parallel.hpp"
#include "svpc/picnn/adamax.hpp"
#include "svpc/picnn/loss.hpp"
#include "svpc/picnn/network.hpp"
#include "svpc/ssv.hpp"

namespace svpc::nn {

/// Flat storage of learning tuples (m, zeta, target, phi).
struct LearningSet {
  std::size_t minors_size = 3;
  std::size_t zeta_size = 0;
  std::vector<double> mhat;
  std::vector<double> zeta;
  std::vector<double> target;
  std::vector<double> phi;

  std::size_t size() const noexcept { return target.size(); }
  bool empty() const noexcept { return target.empty(); }
  int dim() const { return dimension_of_minors(static_cast<int>(minors_size)); }

  std::span<const double> m_row(std::size_t i) const {
    return {mhat.data() + i * minors_size, minors_size};
  }
  std::span<const double> zeta_row(std::size_t i) const {
    return {zeta.data() + i * zeta_size, zeta_size};
  }

  void add(std::span<const double> m, std::span<const double> z, double t, double f) {
    if (m.size() != minors_size || z.size() != zeta_size)
      throw ShapeError("learning tuple has the wrong width");
    mhat.insert(mhat.end(), m.begin(), m.end());
    zeta.insert(zeta.end(), z.begin(), z.end());
    target.push_back(t);
    phi.push_back(f);
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t patience = 10;
  double lambda_ineq = 0.0;
  double lambda_sym = 0.0;
  std::size_t max_epochs = 2000;
  std::uint64_t seed = 0;
  std::size_t ensemble_size = 1;
  double min_improvement = 1e-12;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (batch_size == 0) throw ParameterError("batch size must be positive");
    if (patience == 0) throw ParameterError("patience must be at least 1");
    if (!(lambda_ineq >= 0.0) || !(lambda_sym >= 0.0))
      throw ParameterError("penalty weights must be nonnegative");
    if (max_epochs == 0) throw ParameterError("max_epochs must be positive");
    if (ensemble_size == 0) throw ParameterError("ensemble size must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  LossParts train;
  LossParts validation;
};

struct TrainResult {
  NetworkParams params;  ///< parameters after the last epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

/// Minors of pi(nu_i) for every non-identity pi, sample-major.
inline std::vector<double> orbit_minors(const LearningSet& s) {
  const int d = s.dim();
  const auto group = symmetry_group(d);
  const std::size_t K = s.minors_size;
  std::vector<double> out;
  out.reserve(s.size() * (group.size() - 1) * K);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const SsvVector v(s.m_row(i).first(static_cast<std::size_t>(d)));
    for (std::size_t g = 1; g < group.size(); ++g) {
      const MinorsVector m = minors(group[g](v));
      out.insert(out.end(), m.values().begin(), m.values().end());
    }
  }
  return out;
}

namespace detail {

/// Assigns each sample a group of identical parameter vectors; group ids
/// follow first appearance.
class ZetaGroups {
 public:
  /// Group id, and whether this call created the group.
  std::pair<std::size_t, bool> group_of(std::span<const double> z) {
    std::vector<double> key(z.begin(), z.end());
    auto [it, fresh] = ids_.try_emplace(std::move(key), reps_.size());
    if (fresh) reps_.push_back(it->first);
    return {it->second, fresh};
  }
  std::size_t size() const { return reps_.size(); }
  const std::vector<double>& zeta(std::size_t g) const { return reps_[g]; }
  void clear() {
    ids_.clear();
    reps_.clear();
  }

 private:
  std::map<std::vector<double>, std::size_t> ids_;
  std::vector<std::vector<double>> reps_;
};

}  // namespace detail

/// Full-pass losses. mse and sym are means over the whole set; ineq is the
/// per-batch sum averaged over the ceil(N / batch) batches of an epoch, so it
/// stays on the scale of the quantity being minimised.
inline LossParts evaluate_loss(const NetworkParams& p, const LearningSet& s,
                               std::span<const double> orbit_m, double lambda_ineq,
                               double lambda_sym, std::size_t batch_size) {
  if (s.empty()) throw ShapeError("cannot evaluate the loss of an empty set");
  const std::size_t K = s.minors_size;
  const std::size_t g = orbit_m.size() / (s.size() * K);
  detail::ZetaGroups groups;
  std::vector<ZetaPath> paths;
  ForwardCache c;
  LossParts out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto [gid, fresh] = groups.group_of(s.zeta_row(i));
    if (fresh) compute_zeta_path(p, s.zeta_row(i), paths.emplace_back());
    const ZetaPath& zp = paths[gid];
    const double pred = forward_m(p, s.m_row(i), zp, c);
    const double e = pred - s.target[i];
    out.mse += e * e;
    const double over = std::max(pred - s.phi[i], 0.0);
    out.ineq += over * over;
    for (std::size_t j = 0; j < g; ++j) {
      const double o = forward_m(p, orbit_m.subspan((i * g + j) * K, K), zp, c);
      out.sym += (pred - o) * (pred - o);
    }
  }
  const double n = static_cast<double>(s.size());
  const double batches = std::ceil(n / static_cast<double>(batch_size));
  out.mse /= n;
  out.ineq /= batches;
  if (g > 0) out.sym /= n * static_cast<double>(g);
  out.total = out.mse + lambda_ineq * out.ineq + lambda_sym * out.sym;
  return out;
}

/// Gradient of the batch loss over the given sample indices.
class BatchGradient {
 public:
  BatchGradient(const LearningSet& s, std::span<const double> orbit_m)
      : s_(s), orbit_m_(orbit_m) {
    g_ = s.empty() ? 0 : orbit_m.size() / (s.size() * s.minors_size);
  }

  LossParts operator()(const NetworkParams& p, std::span<const std::size_t> idx,
                       double lambda_ineq, double lambda_sym, NetworkParams& grad) {
    for (auto& t : grad.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
    const std::size_t B = idx.size();
    const std::size_t K = s_.minors_size;
    const bool sym = lambda_sym > 0.0 && g_ > 0;
    const std::size_t per = sym ? g_ + 1 : 1;
    if (caches_.size() < B * per) caches_.resize(B * per);
    preds_.resize(B);
    orbit_.resize(sym ? B * g_ : 0);
    targets_.resize(B);
    phis_.resize(B);
    group_.resize(B);
    groups_.clear();
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = idx[b];
      const auto [gid, fresh] = groups_.group_of(s_.zeta_row(i));
      if (fresh) {
        if (paths_.size() <= gid) paths_.resize(gid + 1);
        compute_zeta_path(p, s_.zeta_row(i), paths_[gid]);
      }
      group_[b] = gid;
      const ZetaPath& zp = paths_[gid];
      preds_[b] = forward_m(p, s_.m_row(i), zp, caches_[b * per]);
      targets_[b] = s_.target[i];
      phis_[b] = s_.phi[i];
      if (sym)
        for (std::size_t j = 0; j < g_; ++j)
          orbit_[b * g_ + j] =
              forward_m(p, orbit_m_.subspan((i * g_ + j) * K, K), zp, caches_[b * per + 1 + j]);
    }
    const LossParts parts =
        loss(preds_, targets_, phis_, orbit_, lambda_ineq, sym ? lambda_sym : 0.0);
    if (adj_.size() < groups_.size()) adj_.resize(groups_.size());
    for (std::size_t q = 0; q < groups_.size(); ++q) adj_[q].reset(p.arch());
    const double nb = static_cast<double>(B);
    const double ws = sym ? 2.0 * lambda_sym / (nb * static_cast<double>(g_)) : 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const ZetaPath& zp = paths_[group_[b]];
      ZetaAdjoint& adj = adj_[group_[b]];
      double dp = 2.0 * (preds_[b] - targets_[b]) / nb;
      dp += 2.0 * lambda_ineq * std::max(preds_[b] - phis_[b], 0.0);
      if (sym) {
        for (std::size_t j = 0; j < g_; ++j) {
          const double diff = preds_[b] - orbit_[b * g_ + j];
          dp += ws * diff;
          backward_m(p, caches_[b * per + 1 + j], zp, -ws * diff, grad, adj);
        }
      }
      backward_m(p, caches_[b * per], zp, dp, grad, adj);
    }
    for (std::size_t q = 0; q < groups_.size(); ++q) backward_zeta(p, paths_[q], adj_[q], grad);
    return parts;
  }

 private:
  const LearningSet& s_;
  std::span<const double> orbit_m_;
  std::size_t g_ = 0;
  std::vector<ForwardCache> caches_;
  std::vector<ZetaPath> paths_;
  std::vector<ZetaAdjoint> adj_;
  std::vector<std::size_t> group_;
  detail::ZetaGroups groups_;
  std::vector<double> preds_, orbit_, targets_, phis_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

inline TrainResult train(const LearningSet& train_set, const LearningSet& val_set,
                         const Architecture& arch, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw ShapeError("training and validation partitions must be nonempty");
  if (train_set.minors_size != arch.input_size || train_set.zeta_size != arch.zeta_size ||
      val_set.minors_size != arch.input_size || val_set.zeta_size != arch.zeta_size)
    throw ShapeError("dataset width does not match the architecture");

  TrainResult r;
  r.params = init_params(arch, cfg.seed);
  NetworkParams grad(arch);
  AdamaxState opt(r.params);
  const auto orbit_train = orbit_minors(train_set);
  const auto orbit_val = orbit_minors(val_set);
  BatchGradient batch_grad(train_set, orbit_train);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      batch_grad(r.params, std::span<const std::size_t>(order).subspan(start, len),
                 cfg.lambda_ineq, cfg.lambda_sym, grad);
      adamax_step(opt, r.params, grad, cfg.learning_rate);
      project_weights(r.params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = evaluate_loss(r.params, train_set, orbit_train, cfg.lambda_ineq, cfg.lambda_sym,
                              cfg.batch_size);
    rec.validation = evaluate_loss(r.params, val_set, orbit_val, cfg.lambda_ineq,
                                   cfg.lambda_sym, cfg.batch_size);
    r.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.validation.total < r.best_validation - cfg.min_improvement) {
      r.best_validation = rec.validation.total;
      r.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      r.stopped_early = true;
      break;
    }
  }
  return r;
}

/// Independent realizations with seeds seed, seed + 1, ...; run concurrently
/// on up to `threads` workers.
inline std::vector<TrainResult> train_ensemble(const LearningSet& train_set,
                                               const LearningSet& val_set,
                                               const Architecture& arch, const TrainConfig& cfg,
                                               unsigned threads = 1) {
  cfg.validate();
  std::vector<TrainResult> out(cfg.ensemble_size);
  parallel_for(cfg.ensemble_size, threads, [&](std::size_t r) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + r;
    out[r] = train(train_set, val_set, arch, c);
  });
  return out;
}

}  // namespace svpc::nn
