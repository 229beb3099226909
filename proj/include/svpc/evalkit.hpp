#pragma once

// Error metrics, cross-sections and parameter sweeps.
//
// Metric convention (all normalised by the reference):
//   mean_error          = mean|pred - ref| / mean|ref|
//   rel_quadratic_error = ||pred - ref||_2 / ||ref||_2
//   rel_max_error       = max|pred - ref| / max|ref|

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "svpc/energy.hpp"
#include "svpc/envelope.hpp"
#include "svpc/errors.hpp"
#include "svpc/format.hpp"
#include "svpc/json_io.hpp"
#include "svpc/parallel.hpp"
#include "svpc/picnn/network.hpp"
#include "svpc/ssv.hpp"

namespace svpc {

inline constexpr const char* kMetricConvention =
    "mean_error = mean|pred-ref|/mean|ref|; rel_quadratic_error = ||pred-ref||_2/||ref||_2; "
    "rel_max_error = max|pred-ref|/max|ref|";

struct ErrorReport {
  double mean_error = 0.0;
  double rel_quadratic_error = 0.0;
  double rel_max_error = 0.0;
  std::size_t points = 0;
  json grid = json::object();
  std::vector<double> zeta;
};

inline ErrorReport error_metrics(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size())
    throw ShapeError("prediction and reference differ in length (" +
                     std::to_string(pred.size()) + " vs " + std::to_string(ref.size()) + ")");
  if (ref.empty()) throw ShapeError("error metrics of an empty grid");
  double sum_d = 0, sum_r = 0, sq_d = 0, sq_r = 0, max_d = 0, max_r = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = std::abs(pred[i] - ref[i]);
    const double r = std::abs(ref[i]);
    if (!std::isfinite(d) || !std::isfinite(r))
      throw DomainError("non-finite value in error metrics at index " + std::to_string(i));
    sum_d += d;
    sum_r += r;
    sq_d += d * d;
    sq_r += r * r;
    max_d = std::max(max_d, d);
    max_r = std::max(max_r, r);
  }
  if (max_r == 0.0) throw DomainError("error metrics are undefined for an all-zero reference");
  ErrorReport e;
  e.mean_error = sum_d / sum_r;
  e.rel_quadratic_error = std::sqrt(sq_d) / std::sqrt(sq_r);
  e.rel_max_error = max_d / max_r;
  e.points = ref.size();
  return e;
}

inline json to_json(const ErrorReport& e) {
  json j{{"mean_error", e.mean_error},
         {"rel_quadratic_error", e.rel_quadratic_error},
         {"rel_max_error", e.rel_max_error},
         {"points", e.points},
         {"grid", e.grid},
         {"convention", kMetricConvention}};
  if (!e.zeta.empty()) j["zeta"] = e.zeta;
  return j;
}

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation
};

struct EnsembleReport {
  std::vector<ErrorReport> realizations;
  MetricSummary mean_error, rel_quadratic_error, rel_max_error;
};

inline EnsembleReport summarize(std::vector<ErrorReport> reports) {
  EnsembleReport out;
  auto stat = [&](auto field) {
    MetricSummary s;
    const double n = static_cast<double>(reports.size());
    for (const auto& r : reports) s.mean += r.*field;
    s.mean /= n;
    if (reports.size() > 1) {
      double ss = 0;
      for (const auto& r : reports) ss += (r.*field - s.mean) * (r.*field - s.mean);
      s.std = std::sqrt(ss / (n - 1));
    }
    return s;
  };
  if (reports.empty()) throw SpecError("no reports to summarize");
  out.mean_error = stat(&ErrorReport::mean_error);
  out.rel_quadratic_error = stat(&ErrorReport::rel_quadratic_error);
  out.rel_max_error = stat(&ErrorReport::rel_max_error);
  out.realizations = std::move(reports);
  return out;
}

inline json to_json(const EnsembleReport& r) {
  json reals = json::array();
  for (const auto& e : r.realizations) reals.push_back(to_json(e));
  auto s = [](const MetricSummary& m) { return json{{"mean", m.mean}, {"std", m.std}}; };
  return {{"realizations", reals},
          {"mean_error", s(r.mean_error)},
          {"rel_quadratic_error", s(r.rel_quadratic_error)},
          {"rel_max_error", s(r.rel_max_error)},
          {"convention", kMetricConvention}};
}

/// n x n points on [lo, hi]^2 (or n^3 on the cube), last axis fastest.
inline std::vector<SsvVector> uniform_grid(int d, double lo, double hi, std::size_t n) {
  require_dimension(d);
  if (n < 2) throw SpecError("evaluation grid needs at least 2 points per axis");
  return build_lattice(LatticeSpec::uniform(d, lo, hi, n)).points();
}

// --- evaluators -----------------------------------------------------------------

struct EvalValue {
  double value = 0.0;
  double std = 0.0;
};

struct Evaluator {
  std::string name;
  bool has_std = false;
  std::function<EvalValue(const SsvVector&, std::span<const double>)> fn;

  double operator()(const SsvVector& v, std::span<const double> zeta = {}) const {
    return fn(v, zeta).value;
  }
};

inline Evaluator analytic_envelope(const EnergyModel& model) {
  if (!model.has_analytic_envelope())
    throw SpecError("model " + model.id() + " has no analytic envelope");
  return {model.id() + "_pc", false,
          [model](const SsvVector& v, std::span<const double> z) {
            return EvalValue{model.phi_pc(v, z), 0.0};
          }};
}

inline Evaluator density(const EnergyModel& model) {
  return {model.id(), false, [model](const SsvVector& v, std::span<const double> z) {
            return EvalValue{model.phi(v, z), 0.0};
          }};
}

/// Nearest stored query point, no interpolation.
inline Evaluator field_nearest(EnvelopeField field, std::string name = "svpc_lp") {
  if (field.points.empty()) throw SpecError("envelope field is empty");
  auto shared = std::make_shared<const EnvelopeField>(std::move(field));
  return {std::move(name), false, [shared](const SsvVector& v, std::span<const double>) {
            double best = std::numeric_limits<double>::infinity();
            double value = std::numeric_limits<double>::quiet_NaN();
            for (const auto& p : shared->points) {
              double dist = 0;
              for (int a = 0; a < v.dim(); ++a) dist += (p.query[a] - v[a]) * (p.query[a] - v[a]);
              if (dist < best) {
                best = dist;
                value = p.value;
              }
            }
            return EvalValue{value, 0.0};
          }};
}

/// Frozen network. With a damage model the parameter is clamped to alpha_inf
/// before inference.
inline Evaluator network(nn::NetworkParams params, std::optional<EnergyModel> clamp = {},
                         bool symmetrize = false, std::string name = "network") {
  auto shared = std::make_shared<const nn::NetworkParams>(std::move(params));
  return {std::move(name), false,
          [shared, clamp, symmetrize](const SsvVector& v, std::span<const double> z) {
            const std::vector<double> zz =
                clamp ? clamp->inference_zeta(z) : std::vector<double>(z.begin(), z.end());
            const double f = symmetrize ? nn::symmetrize_prediction(*shared, v, zz)
                                        : nn::predict(*shared, v, zz);
            return EvalValue{f, 0.0};
          }};
}

inline Evaluator ensemble(std::vector<nn::NetworkParams> nets,
                          std::optional<EnergyModel> clamp = {}, std::string name = "ensemble") {
  if (nets.empty()) throw SpecError("ensemble is empty");
  auto shared = std::make_shared<const std::vector<nn::NetworkParams>>(std::move(nets));
  return {std::move(name), true, [shared, clamp](const SsvVector& v, std::span<const double> z) {
            const std::vector<double> zz =
                clamp ? clamp->inference_zeta(z) : std::vector<double>(z.begin(), z.end());
            const auto r = nn::ensemble_predict(*shared, v, zz);
            return EvalValue{r.mean, r.std};
          }};
}

inline std::vector<double> evaluate_on(const Evaluator& e, std::span<const SsvVector> pts,
                                       std::span<const double> zeta = {}, unsigned threads = 1) {
  std::vector<double> out(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) { out[i] = e(pts[i], zeta); });
  return out;
}

// --- cross-sections ---------------------------------------------------------------

enum class SectionAxis { first, diagonal };  ///< (t, 0) or (t, t)

inline const char* to_string(SectionAxis a) { return a == SectionAxis::first ? "t0" : "tt"; }

inline SectionAxis section_axis_from_string(std::string_view s) {
  if (s == "t0" || s == "first") return SectionAxis::first;
  if (s == "tt" || s == "diagonal") return SectionAxis::diagonal;
  throw SpecError("unknown cross-section axis '" + std::string(s) + "' (expected t0 or tt)");
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
      out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
  }
};

inline SsvVector section_point(SectionAxis axis, double t, int d = 2) {
  std::vector<double> v(static_cast<std::size_t>(d), 0.0);
  v[0] = t;
  if (axis == SectionAxis::diagonal)
    for (auto& x : v) x = t;
  return SsvVector(v);
}

/// Columns: t, then one value column per evaluator and a std column for
/// evaluators that provide one.
inline Table cross_section(std::span<const Evaluator> evaluators, SectionAxis axis, double t0,
                           double t1, std::size_t samples, std::span<const double> zeta = {},
                           int d = 2) {
  if (samples < 2) throw SpecError("cross-section needs at least 2 samples");
  Table t;
  t.columns.push_back("t");
  for (const auto& e : evaluators) {
    t.columns.push_back(e.name);
    if (e.has_std) t.columns.push_back(e.name + "_std");
  }
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(samples - 1);
    const SsvVector v = section_point(axis, s, d);
    std::vector<double> row{s};
    for (const auto& e : evaluators) {
      const auto r = e.fn(v, zeta);
      row.push_back(r.value);
      if (e.has_std) row.push_back(r.std);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Minimal SVG line plot of a cross-section table; std columns are skipped.
inline std::string section_svg(const Table& t, const std::string& title) {
  const double W = 640, H = 400, L = 60, R = 20, T = 30, B = 40;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  std::vector<std::size_t> series;
  for (std::size_t c = 1; c < t.columns.size(); ++c)
    if (!t.columns[c].ends_with("_std")) series.push_back(c);
  for (const auto& r : t.rows) {
    xmin = std::min(xmin, r[0]);
    xmax = std::max(xmax, r[0]);
    for (auto c : series)
      if (std::isfinite(r[c])) {
        ymin = std::min(ymin, r[c]);
        ymax = std::max(ymax, r[c]);
      }
  }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto X = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto Y = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << L << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title
    << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, const std::string& txt, const char* anchor) {
    s << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"11\" "
      << "text-anchor=\"" << anchor << "\">" << txt << "</text>\n";
  };
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", xmin);
  label(L, H - B + 16, buf, "middle");
  std::snprintf(buf, sizeof buf, "%.3g", xmax);
  label(W - R, H - B + 16, buf, "middle");
  std::snprintf(buf, sizeof buf, "%.3g", ymin);
  label(L - 6, H - B, buf, "end");
  std::snprintf(buf, sizeof buf, "%.3g", ymax);
  label(L - 6, T + 4, buf, "end");
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = colors[k % 5];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : t.rows)
      if (std::isfinite(r[series[k]])) s << X(r[0]) << ',' << Y(r[series[k]]) << ' ';
    s << "\"/>\n";
    label(W - R - 4, T + 14 * static_cast<double>(k + 1), t.columns[series[k]], "end");
    s << "<line x1=\"" << W - R - 150 << "\" y1=\"" << T + 14 * static_cast<double>(k + 1) - 4
      << "\" x2=\"" << W - R - 130 << "\" y2=\"" << T + 14 * static_cast<double>(k + 1) - 4
      << "\" stroke=\"" << col << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// --- sweeps and diagnostics -------------------------------------------------------

using Reference = std::function<double(const SsvVector&, std::span<const double>)>;

/// One report per parameter value on a common grid.
inline std::vector<ErrorReport> parameter_sweep(const Evaluator& eval, const Reference& ref,
                                                const std::vector<std::vector<double>>& params,
                                                std::span<const SsvVector> grid,
                                                unsigned threads = 1) {
  if (!ref) throw SpecError("parameter sweep needs a reference");
  std::vector<ErrorReport> out(params.size());
  parallel_for(params.size(), threads, [&](std::size_t k) {
    std::vector<double> pred(grid.size()), r(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      pred[i] = eval(grid[i], params[k]);
      r[i] = ref(grid[i], params[k]);
    }
    out[k] = error_metrics(pred, r);
    out[k].zeta = params[k];
  });
  return out;
}

/// Share of points where the prediction exceeds phi by more than
/// rel_tol * (max phi - min phi).
inline double upper_bound_violation_fraction(std::span<const double> pred,
                                             std::span<const double> phi, double rel_tol = 0.01) {
  if (pred.size() != phi.size() || pred.empty()) throw ShapeError("mismatched inputs");
  const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
  const double slack = rel_tol * (*hi - *lo);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) bad += pred[i] > phi[i] + slack;
  return static_cast<double>(bad) / static_cast<double>(pred.size());
}

/// Mean over grid points and non-identity group elements of |f(pi v) - f(v)|.
inline double mean_orbit_discrepancy(const Evaluator& eval, std::span<const SsvVector> grid,
                                     std::span<const double> zeta = {}) {
  if (grid.empty()) throw ShapeError("empty grid");
  const auto group = symmetry_group(grid.front().dim());
  double sum = 0;
  for (const auto& v : grid) {
    const double f = eval(v, zeta);
    for (std::size_t g = 1; g < group.size(); ++g) sum += std::abs(eval(group[g](v), zeta) - f);
  }
  return sum / static_cast<double>(grid.size() * (group.size() - 1));
}

}  // namespace svpc
