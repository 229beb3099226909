#pragma once

// Input convex networks over the minors m(nu).
//
// FICNN, layers i = 0..k-1:
//   z_{i+1} = g_i(Wz_i z_i + Wm_i m + b_i),             z_0 = 0, Wz_0 = 0
//
// PICNN adds a parameter path u_0 = zeta:
//   u_{i+1} = relu(Wt_i u_i + bt_i)
//   z_{i+1} = g_i(Wz_i (z_i o max(Wzu_i u_i + bz_i, 0))
//                 + Wm_i (m o (Wmu_i u_i + bm_i)) + Wu_i u_i + b_i)
//
// g_i is ReLU on hidden layers and the identity on the single output neuron.
// Convexity in m holds as long as every Wz_i is nonnegative.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "svpc/errors.hpp"
#include "svpc/ssv.hpp"

namespace svpc::nn {

enum class Variant { ficnn, picnn };

inline const char* to_string(Variant v) { return v == Variant::ficnn ? "ficnn" : "picnn"; }

inline Variant variant_from_string(const std::string& s) {
  if (s == "ficnn") return Variant::ficnn;
  if (s == "picnn") return Variant::picnn;
  throw SpecError("unknown network variant '" + s + "'");
}

inline constexpr double kProjectionEps = 1e-6;

struct Architecture {
  Variant variant = Variant::ficnn;
  std::size_t input_size = 3;              ///< k_d, length of the minors vector
  std::size_t zeta_size = 0;               ///< p; zero for FICNN
  std::vector<std::size_t> hidden;         ///< widths of the m-path hidden layers
  std::vector<std::size_t> zeta_hidden;    ///< widths of the zeta-path hidden layers

  static Architecture ficnn(int d, std::vector<std::size_t> hidden) {
    return {Variant::ficnn, static_cast<std::size_t>(minors_count(d)), 0, std::move(hidden), {}};
  }
  static Architecture picnn(int d, std::size_t p, std::vector<std::size_t> hidden,
                            std::vector<std::size_t> zeta_hidden) {
    return {Variant::picnn, static_cast<std::size_t>(minors_count(d)), p, std::move(hidden),
            std::move(zeta_hidden)};
  }

  /// Number of layers k, output layer included.
  std::size_t layers() const noexcept { return hidden.size() + 1; }
  std::size_t out_width(std::size_t i) const { return i + 1 < layers() ? hidden[i] : 1; }
  std::size_t z_width(std::size_t i) const { return i == 0 ? 0 : hidden[i - 1]; }
  std::size_t u_width(std::size_t i) const {
    if (variant == Variant::ficnn) return 0;
    return i == 0 ? zeta_size : zeta_hidden[i - 1];
  }
  int dim() const { return dimension_of_minors(static_cast<int>(input_size)); }

  void validate() const {
    dimension_of_minors(static_cast<int>(input_size));
    if (hidden.empty()) throw SpecError("network needs at least one hidden layer");
    for (auto w : hidden)
      if (w == 0) throw SpecError("hidden layer width must be positive");
    if (variant == Variant::ficnn) {
      if (zeta_size != 0 || !zeta_hidden.empty())
        throw SpecError("FICNN has no parameter path");
    } else {
      if (zeta_size == 0) throw SpecError("PICNN needs at least one parameter input");
      if (zeta_hidden.size() != hidden.size())
        throw SpecError("PICNN parameter path needs one width per hidden layer");
      for (auto w : zeta_hidden)
        if (w == 0) throw SpecError("hidden layer width must be positive");
    }
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Row-major dense matrix with a name; biases are column vectors.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool convex = false;  ///< a Wz weight, kept nonnegative
  std::vector<double> data;

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Positions of one layer's tensors in NetworkParams::tensors; -1 if absent.
struct LayerSlots {
  int Wz = -1, Wm = -1, b = -1;
  int Wt = -1, bt = -1, Wzu = -1, bz = -1, Wmu = -1, bm = -1, Wu = -1;
};

class NetworkParams {
 public:
  NetworkParams() = default;

  /// All-zero parameters with the shapes required by arch.
  explicit NetworkParams(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    const std::size_t K = arch_.input_size;
    const bool pic = arch_.variant == Variant::picnn;
    for (std::size_t i = 0; i < arch_.layers(); ++i) {
      const std::size_t out = arch_.out_width(i), zin = arch_.z_width(i), uin = arch_.u_width(i);
      const std::string pre = "layer" + std::to_string(i) + ".";
      LayerSlots s;
      if (i > 0) s.Wz = add(pre + "W_z", out, zin, true);
      s.Wm = add(pre + "W_m", out, K);
      s.b = add(pre + "b", out, 1);
      if (pic) {
        if (i + 1 < arch_.layers()) {
          s.Wt = add(pre + "W_zeta", arch_.u_width(i + 1), uin);
          s.bt = add(pre + "b_zeta", arch_.u_width(i + 1), 1);
        }
        if (i > 0) {
          s.Wzu = add(pre + "W_zu", zin, uin);
          s.bz = add(pre + "b_z", zin, 1);
        }
        s.Wmu = add(pre + "W_mu", K, uin);
        s.bm = add(pre + "b_m", K, 1);
        s.Wu = add(pre + "W_u", out, uin);
      }
      slots_.push_back(s);
    }
  }

  const Architecture& arch() const noexcept { return arch_; }
  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  const LayerSlots& slots(std::size_t layer) const { return slots_[layer]; }

  Tensor& at(int slot) { return tensors_[static_cast<std::size_t>(slot)]; }
  const Tensor& at(int slot) const { return tensors_[static_cast<std::size_t>(slot)]; }

  Tensor& find(const std::string& name) {
    for (auto& t : tensors_)
      if (t.name == name) return t;
    throw SpecError("no tensor named '" + name + "'");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.data.size();
    return n;
  }

  void fill(double v) {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), v);
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.arch_ == b.arch_ && a.tensors_ == b.tensors_;
  }

 private:
  int add(std::string name, std::size_t rows, std::size_t cols, bool convex = false) {
    tensors_.push_back({std::move(name), rows, cols, convex, std::vector<double>(rows * cols, 0.0)});
    return static_cast<int>(tensors_.size() - 1);
  }

  Architecture arch_;
  std::vector<Tensor> tensors_;
  std::vector<LayerSlots> slots_;
};

/// x -> max(x, 0) + eps on every convex weight; applied once per step.
inline void project_weights(NetworkParams& p) {
  for (auto& t : p.tensors())
    if (t.convex)
      for (auto& x : t.data) x = std::max(x, 0.0) + kProjectionEps;
}

/// Wz ~ N(0.1, 0.1) then projected; other weights ~ U(-1/sqrt(n), 1/sqrt(n))
/// with n the fan-in; biases zero.
inline NetworkParams init_params(const Architecture& arch, std::uint64_t seed) {
  NetworkParams p(arch);
  std::mt19937_64 rng(seed);
  for (auto& t : p.tensors()) {
    if (t.cols == 1 && t.name.find(".b") != std::string::npos) continue;
    if (t.convex) {
      std::normal_distribution<double> nd(0.1, 0.1);
      for (auto& x : t.data) x = nd(rng);
    } else {
      const double a = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(t.cols, 1)));
      std::uniform_real_distribution<double> ud(-a, a);
      for (auto& x : t.data) x = ud(rng);
    }
  }
  project_weights(p);
  return p;
}

/// Everything in a forward pass that depends on zeta alone. Samples sharing a
/// parameter value share one ZetaPath.
struct ZetaPath {
  std::vector<double> zeta;
  std::vector<std::vector<double>> u;       ///< u_0..u_{k-1}
  std::vector<std::vector<double>> upre;    ///< pre-activations of u_{i+1}
  std::vector<std::vector<double>> gz_pre;  ///< Wzu u + bz before max
  std::vector<std::vector<double>> gz;      ///< max(gz_pre, 0)
  std::vector<std::vector<double>> gm;      ///< Wmu u + bm
  std::vector<std::vector<double>> bias;    ///< Wu u + b (b for FICNN)
};

/// Adjoints of the ZetaPath outputs, summed over the samples that share it.
struct ZetaAdjoint {
  std::vector<std::vector<double>> dgz;    ///< w.r.t. gz_pre, already masked
  std::vector<std::vector<double>> dgm;
  std::vector<std::vector<double>> dbias;

  void reset(const Architecture& A) {
    const std::size_t k = A.layers();
    dgz.resize(k);
    dgm.resize(k);
    dbias.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      dbias[i].assign(A.out_width(i), 0.0);
      if (A.variant == Variant::picnn) {
        dgz[i].assign(A.z_width(i), 0.0);
        dgm[i].assign(A.input_size, 0.0);
      }
    }
  }
};

/// Per-evaluation cache of the m-path for the backward pass.
struct ForwardCache {
  std::vector<double> m;                       ///< input minors
  std::vector<std::vector<double>> z;          ///< z_0..z_k
  std::vector<std::vector<double>> pre;        ///< pre-activations of z_{i+1}
  std::vector<std::vector<double>> sz, sm;     ///< Hadamard products fed to Wz / Wm
  double output = 0.0;
  ZetaPath zeta_path;                          ///< filled by the one-shot forward
};

namespace detail {

// y += A x
inline void gemv_add(const Tensor& A, const double* x, double* y) {
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double* a = A.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) s += a[c] * x[c];
    y[r] += s;
  }
}

// y += A^T x
inline void gemv_t_add(const Tensor& A, const double* x, double* y) {
  for (std::size_t r = 0; r < A.rows; ++r) {
    const double* a = A.row(r);
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < A.cols; ++c) y[c] += a[c] * xr;
  }
}

// G += x y^T
inline void outer_add(Tensor& G, const double* x, const double* y) {
  for (std::size_t r = 0; r < G.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    double* g = G.row(r);
    for (std::size_t c = 0; c < G.cols; ++c) g[c] += xr * y[c];
  }
}

inline void add_bias(const Tensor& b, double* y) {
  for (std::size_t r = 0; r < b.rows; ++r) y[r] += b.data[r];
}

}  // namespace detail

inline void compute_zeta_path(const NetworkParams& p, std::span<const double> zeta,
                              ZetaPath& zp) {
  const Architecture& A = p.arch();
  if (zeta.size() != A.zeta_size)
    throw ShapeError("network expects " + std::to_string(A.zeta_size) + " parameters, got " +
                     std::to_string(zeta.size()));
  const std::size_t k = A.layers();
  zp.zeta.assign(zeta.begin(), zeta.end());
  zp.bias.resize(k);
  if (A.variant == Variant::ficnn) {
    for (std::size_t i = 0; i < k; ++i) zp.bias[i] = p.at(p.slots(i).b).data;
    return;
  }
  zp.u.resize(k);
  zp.upre.resize(k);
  zp.gz_pre.resize(k);
  zp.gz.resize(k);
  zp.gm.resize(k);
  zp.u[0].assign(zeta.begin(), zeta.end());
  for (std::size_t i = 0; i < k; ++i) {
    const LayerSlots& s = p.slots(i);
    const auto& u = zp.u[i];
    if (i > 0) {
      auto& g = zp.gz_pre[i];
      g = p.at(s.bz).data;
      detail::gemv_add(p.at(s.Wzu), u.data(), g.data());
      auto& gp = zp.gz[i];
      gp.resize(g.size());
      for (std::size_t j = 0; j < g.size(); ++j) gp[j] = std::max(g[j], 0.0);
    }
    auto& gm = zp.gm[i];
    gm = p.at(s.bm).data;
    detail::gemv_add(p.at(s.Wmu), u.data(), gm.data());
    auto& b = zp.bias[i];
    b = p.at(s.b).data;
    detail::gemv_add(p.at(s.Wu), u.data(), b.data());
    if (i + 1 < k) {
      auto& up = zp.upre[i];
      up = p.at(s.bt).data;
      detail::gemv_add(p.at(s.Wt), u.data(), up.data());
      auto& un = zp.u[i + 1];
      un.resize(up.size());
      for (std::size_t j = 0; j < up.size(); ++j) un[j] = std::max(up[j], 0.0);
    }
  }
}

/// m-path of the forward pass on a precomputed zeta path.
inline double forward_m(const NetworkParams& p, std::span<const double> m, const ZetaPath& zp,
                        ForwardCache& c) {
  const Architecture& A = p.arch();
  if (m.size() != A.input_size)
    throw ShapeError("network expects " + std::to_string(A.input_size) + " minors, got " +
                     std::to_string(m.size()));
  const std::size_t k = A.layers();
  const bool pic = A.variant == Variant::picnn;
  c.m.assign(m.begin(), m.end());
  c.z.resize(k + 1);
  c.pre.resize(k);
  c.z[0].clear();
  if (pic) {
    c.sz.resize(k);
    c.sm.resize(k);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const LayerSlots& s = p.slots(i);
    const std::size_t out = A.out_width(i);
    auto& pre = c.pre[i];
    pre = zp.bias[i];
    if (!pic) {
      if (i > 0) detail::gemv_add(p.at(s.Wz), c.z[i].data(), pre.data());
      detail::gemv_add(p.at(s.Wm), c.m.data(), pre.data());
    } else {
      if (i > 0) {
        const auto& g = zp.gz[i];
        auto& sz = c.sz[i];
        sz.resize(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) sz[j] = c.z[i][j] * g[j];
        detail::gemv_add(p.at(s.Wz), sz.data(), pre.data());
      }
      const auto& gm = zp.gm[i];
      auto& sm = c.sm[i];
      sm.resize(gm.size());
      for (std::size_t j = 0; j < gm.size(); ++j) sm[j] = c.m[j] * gm[j];
      detail::gemv_add(p.at(s.Wm), sm.data(), pre.data());
    }
    auto& z = c.z[i + 1];
    z.resize(out);
    if (i + 1 < k)
      for (std::size_t j = 0; j < out; ++j) z[j] = std::max(pre[j], 0.0);
    else
      z = pre;
  }
  c.output = c.z[k][0];
  return c.output;
}

inline double forward(const NetworkParams& p, std::span<const double> m,
                      std::span<const double> zeta, ForwardCache& c) {
  if (m.size() != p.arch().input_size)
    throw ShapeError("network expects " + std::to_string(p.arch().input_size) +
                     " minors, got " + std::to_string(m.size()));
  compute_zeta_path(p, zeta, c.zeta_path);
  return forward_m(p, m, c.zeta_path, c);
}

inline double forward(const NetworkParams& p, std::span<const double> m,
                      std::span<const double> zeta = {}) {
  ForwardCache c;
  return forward(p, m, zeta, c);
}

/// Network value at a signed-singular-value point.
inline double predict(const NetworkParams& p, const SsvVector& v,
                      std::span<const double> zeta = {}) {
  const MinorsVector m = minors(v);
  return forward(p, m.values(), zeta);
}

/// m-path backward: accumulates dout * d(output)/d(theta) for the m-path
/// weights into grad and the zeta-path adjoints into adj. ReLU derivative at 0
/// is taken as 0.
inline void backward_m(const NetworkParams& p, const ForwardCache& c, const ZetaPath& zp,
                       double dout, NetworkParams& grad, ZetaAdjoint& adj) {
  const Architecture& A = p.arch();
  const std::size_t k = A.layers();
  const bool pic = A.variant == Variant::picnn;
  thread_local std::vector<double> dz, dz_prev, dpre, tmp;
  dz.assign(1, dout);  // gradient w.r.t. z_{i+1}
  for (std::size_t ii = k; ii-- > 0;) {
    const LayerSlots& s = p.slots(ii);
    const std::size_t out = A.out_width(ii);
    dpre.resize(out);
    for (std::size_t j = 0; j < out; ++j)
      dpre[j] = (ii + 1 < k) ? (c.pre[ii][j] > 0.0 ? dz[j] : 0.0) : dz[j];
    auto& db = adj.dbias[ii];
    for (std::size_t j = 0; j < out; ++j) db[j] += dpre[j];
    dz_prev.assign(A.z_width(ii), 0.0);
    if (!pic) {
      if (ii > 0) {
        detail::outer_add(grad.at(s.Wz), dpre.data(), c.z[ii].data());
        detail::gemv_t_add(p.at(s.Wz), dpre.data(), dz_prev.data());
      }
      detail::outer_add(grad.at(s.Wm), dpre.data(), c.m.data());
    } else {
      if (ii > 0) {
        detail::outer_add(grad.at(s.Wz), dpre.data(), c.sz[ii].data());
        tmp.assign(A.z_width(ii), 0.0);
        detail::gemv_t_add(p.at(s.Wz), dpre.data(), tmp.data());  // d sz
        const auto& g = zp.gz_pre[ii];
        auto& dg = adj.dgz[ii];
        for (std::size_t j = 0; j < g.size(); ++j) {
          dz_prev[j] = tmp[j] * zp.gz[ii][j];
          if (g[j] > 0.0) dg[j] += tmp[j] * c.z[ii][j];
        }
      }
      detail::outer_add(grad.at(s.Wm), dpre.data(), c.sm[ii].data());
      tmp.assign(A.input_size, 0.0);
      detail::gemv_t_add(p.at(s.Wm), dpre.data(), tmp.data());  // d sm
      auto& dgm = adj.dgm[ii];
      for (std::size_t j = 0; j < tmp.size(); ++j) dgm[j] += tmp[j] * c.m[j];
    }
    dz.swap(dz_prev);
  }
}

/// zeta-path backward from the summed adjoints of one ZetaPath.
inline void backward_zeta(const NetworkParams& p, const ZetaPath& zp, const ZetaAdjoint& adj,
                          NetworkParams& grad) {
  const Architecture& A = p.arch();
  const std::size_t k = A.layers();
  for (std::size_t i = 0; i < k; ++i) {
    Tensor& gb = grad.at(p.slots(i).b);
    for (std::size_t j = 0; j < gb.data.size(); ++j) gb.data[j] += adj.dbias[i][j];
  }
  if (A.variant == Variant::ficnn) return;
  thread_local std::vector<std::vector<double>> du;
  thread_local std::vector<double> dup;
  du.resize(k);
  for (std::size_t i = 0; i < k; ++i) du[i].assign(A.u_width(i), 0.0);
  for (std::size_t ii = k; ii-- > 0;) {
    const LayerSlots& s = p.slots(ii);
    const auto& u = zp.u[ii];
    auto& dui = du[ii];
    if (ii > 0) {
      const auto& dg = adj.dgz[ii];
      detail::outer_add(grad.at(s.Wzu), dg.data(), u.data());
      Tensor& gbz = grad.at(s.bz);
      for (std::size_t j = 0; j < dg.size(); ++j) gbz.data[j] += dg[j];
      detail::gemv_t_add(p.at(s.Wzu), dg.data(), dui.data());
    }
    const auto& dgm = adj.dgm[ii];
    detail::outer_add(grad.at(s.Wmu), dgm.data(), u.data());
    Tensor& gbm = grad.at(s.bm);
    for (std::size_t j = 0; j < dgm.size(); ++j) gbm.data[j] += dgm[j];
    detail::gemv_t_add(p.at(s.Wmu), dgm.data(), dui.data());
    detail::outer_add(grad.at(s.Wu), adj.dbias[ii].data(), u.data());
    detail::gemv_t_add(p.at(s.Wu), adj.dbias[ii].data(), dui.data());
    if (ii + 1 < k) {
      // du[ii + 1] is complete: it only feeds layer ii + 1.
      const auto& up = zp.upre[ii];
      dup.resize(up.size());
      for (std::size_t j = 0; j < up.size(); ++j) dup[j] = up[j] > 0.0 ? du[ii + 1][j] : 0.0;
      detail::outer_add(grad.at(s.Wt), dup.data(), u.data());
      Tensor& gbt = grad.at(s.bt);
      for (std::size_t j = 0; j < dup.size(); ++j) gbt.data[j] += dup[j];
      detail::gemv_t_add(p.at(s.Wt), dup.data(), dui.data());
    }
  }
}

/// Accumulates dout * d(output)/d(theta) into grad, which must share p's shape.
inline void backward(const NetworkParams& p, const ForwardCache& c, double dout,
                     NetworkParams& grad) {
  ZetaAdjoint adj;
  adj.reset(p.arch());
  backward_m(p, c, c.zeta_path, dout, grad, adj);
  backward_zeta(p, c.zeta_path, adj, grad);
}

/// Average over the symmetry group; exactly invariant under it.
inline double symmetrize_prediction(const NetworkParams& p, const SsvVector& v,
                                    std::span<const double> zeta = {}) {
  const auto group = symmetry_group(v.dim());
  // Summing in a canonical (sorted) order keeps the result bit-identical
  // across the orbit.
  std::vector<double> vals;
  vals.reserve(group.size());
  for (const auto& g : group) vals.push_back(predict(p, g(v), zeta));
  std::sort(vals.begin(), vals.end());
  double s = 0.0;
  for (double x : vals) s += x;
  return s / static_cast<double>(group.size());
}

struct EnsembleValue {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, zero for a single member
};

inline EnsembleValue ensemble_predict(std::span<const NetworkParams> nets, const SsvVector& v,
                                      std::span<const double> zeta = {}) {
  if (nets.empty()) throw SpecError("ensemble is empty");
  std::vector<double> vals;
  for (const auto& n : nets) vals.push_back(predict(n, v, zeta));
  double mean = 0.0;
  for (double x : vals) mean += x;
  mean /= static_cast<double>(vals.size());
  double ss = 0.0;
  for (double x : vals) ss += (x - mean) * (x - mean);
  const double sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
  return {mean, sd};
}

}  // namespace svpc::nn
