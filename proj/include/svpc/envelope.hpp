#pragma once

// Lattice polyconvexification: the envelope at a query point is the cheapest
// convex combination of lattice points whose lifted minors reproduce the
// lifted query,
//
//   min sum_i xi_i Phi(nu_i)   s.t.  xi >= 0,  sum_i xi_i = 1,
//                                    sum_i xi_i m(nu_i) = m(query).
//
// One LP per query; the lifted columns are built once and shared.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svpc/energy.hpp"
#include "svpc/errors.hpp"
#include "svpc/format.hpp"
#include "svpc/json_io.hpp"
#include "svpc/lattice.hpp"
#include "svpc/parallel.hpp"
#include "svpc/simplex.hpp"
#include "svpc/ssv.hpp"

namespace svpc {

/// Lattice points with finite density, lifted to minors space.
struct LiftedLattice {
  int d = 2;
  std::vector<std::size_t> lattice_index;  ///< source point of each column
  std::vector<MinorsVector> columns;
  std::vector<double> costs;
  std::vector<double> packed;  ///< LP storage: (1, m(nu_i)) per column

  std::size_t rows() const noexcept { return static_cast<std::size_t>(minors_count(d)) + 1; }
  std::size_t size() const noexcept { return costs.size(); }
};

/// Lifts every lattice point; points where the density is +inf are dropped.
template <class Density>
  requires std::invocable<const Density&, const SsvVector&>
LiftedLattice lift_and_evaluate(const Lattice& lat, const Density& density) {
  LiftedLattice out;
  out.d = lat.dim();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double c = density(lat[i]);
    if (std::isinf(c) && c > 0) continue;
    if (!std::isfinite(c))
      throw DomainError("density is not finite at a lattice point");
    const MinorsVector m = minors(lat[i]);
    out.lattice_index.push_back(i);
    out.columns.push_back(m);
    out.costs.push_back(c);
    out.packed.push_back(1.0);
    for (double x : m.values()) out.packed.push_back(x);
  }
  return out;
}

inline LiftedLattice lift_and_evaluate(const Lattice& lat, const EnergyModel& model,
                                       std::span<const double> zeta) {
  model.check_zeta(zeta);
  const std::vector<double> z(zeta.begin(), zeta.end());
  return lift_and_evaluate(lat, [&](const SsvVector& v) { return model.phi(v, z); });
}

struct EnvelopePoint {
  SsvVector query;
  double value = std::numeric_limits<double>::quiet_NaN();
  /// (lattice index, volume fraction) of the supporting points.
  std::vector<std::pair<std::size_t, double>> support;
  LpStatus status = LpStatus::infeasible;
};

/// Solves the envelope LP at one query against prepared columns.
inline EnvelopePoint envelope_at(const LiftedLattice& lifted, const SsvVector& query,
                                 const SimplexOptions& opt = {}) {
  if (query.dim() != lifted.d)
    throw DimensionError("query dimension does not match the lattice");
  const MinorsVector mq = minors(query);
  std::vector<double> rhs{1.0};
  for (double x : mq.values()) rhs.push_back(x);
  const LpView view{lifted.rows(), lifted.costs, lifted.packed, rhs};
  const LpSolution sol = lp_solve(view, opt);
  EnvelopePoint p;
  p.query = query;
  p.status = sol.status;
  if (sol.status == LpStatus::optimal) {
    p.value = sol.objective;
    for (auto [col, x] : sol.xi) p.support.emplace_back(lifted.lattice_index[col], x);
  }
  return p;
}

struct PolyconvexifyOptions {
  SimplexOptions simplex;
  unsigned threads = 1;
};

/// Envelope values at a set of queries, plus what is needed to reproduce them.
struct EnvelopeField {
  int d = 2;
  std::vector<EnvelopePoint> points;
  std::vector<std::size_t> query_shape;  ///< grid shape if the queries form a grid
  json provenance = json::object();

  std::size_t infeasible_count() const {
    std::size_t n = 0;
    for (const auto& p : points) n += p.status != LpStatus::optimal;
    return n;
  }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.value);
    return v;
  }
};

/// Generic form: any density callable over a lattice.
template <class Density>
  requires std::invocable<const Density&, const SsvVector&>
EnvelopeField polyconvexify(const Density& density, const Lattice& lat,
                            std::span<const SsvVector> queries,
                            const PolyconvexifyOptions& opt = {}) {
  const LiftedLattice lifted = lift_and_evaluate(lat, density);
  EnvelopeField field;
  field.d = lat.dim();
  field.points.resize(queries.size());
  parallel_for(queries.size(), opt.threads, [&](std::size_t i) {
    field.points[i] = envelope_at(lifted, queries[i], opt.simplex);
  });
  field.provenance["lattice_points"] = lat.size();
  field.provenance["columns"] = lifted.size();
  field.provenance["solver"] = to_json(opt.simplex);
  return field;
}

inline EnvelopeField polyconvexify(const EnergyModel& model, std::span<const double> zeta,
                                   const Lattice& lat, std::span<const SsvVector> queries,
                                   const PolyconvexifyOptions& opt = {}) {
  model.check_zeta(zeta);
  const std::vector<double> z(zeta.begin(), zeta.end());
  EnvelopeField field = polyconvexify(
      [&](const SsvVector& v) { return model.phi(v, z); }, lat, queries, opt);
  field.provenance["model"] = to_json(model);
  field.provenance["zeta"] = z;
  return field;
}

// --- serialization -----------------------------------------------------------

/// CSV with header nu_1..nu_d,value,status; infeasible values are written as nan.
inline void write_field_csv(const EnvelopeField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (int a = 0; a < field.d; ++a) out << "nu_" << (a + 1) << ',';
  out << "value,status\n";
  for (const auto& p : field.points) {
    for (int a = 0; a < field.d; ++a) out << format_double(p.query[a]) << ',';
    out << format_double(p.value) << ',' << to_string(p.status) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

inline EnvelopeField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty envelope file", 1, 1);
  EnvelopeField field;
  if (line == "nu_1,nu_2,value,status")
    field.d = 2;
  else if (line == "nu_1,nu_2,nu_3,value,status")
    field.d = 3;
  else
    throw ParseError("unexpected envelope header '" + line + "'", 1, 1);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.emplace_back(line.data() + start,
                         (comma == std::string::npos ? line.size() : comma) - start);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const std::size_t expected = static_cast<std::size_t>(field.d) + 2;
    if (cells.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno, 1);
    EnvelopePoint p;
    std::vector<double> q;
    std::size_t col = 1;
    for (int a = 0; a <= field.d; ++a) {
      const auto v = parse_double(cells[static_cast<std::size_t>(a)]);
      if (!v) throw ParseError("bad number '" + std::string(cells[static_cast<std::size_t>(a)]) + "'", lineno, col);
      if (a < field.d)
        q.push_back(*v);
      else
        p.value = *v;
      col += cells[static_cast<std::size_t>(a)].size() + 1;
    }
    p.query = SsvVector(std::span<const double>(q));
    const auto status = cells.back();
    if (status == "optimal")
      p.status = LpStatus::optimal;
    else if (status == "infeasible")
      p.status = LpStatus::infeasible;
    else
      throw ParseError("bad status '" + std::string(status) + "'", lineno, col);
    field.points.push_back(std::move(p));
  }
  return field;
}

}  // namespace svpc
