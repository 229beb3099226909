#pragma once

// Learning datasets: tuples (m(nu), zeta, target, phi) over a lattice and a
// set of parameter values, with optional symmetry augmentation and a
// train/validation split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svpc/energy.hpp"
#include "svpc/envelope.hpp"
#include "svpc/errors.hpp"
#include "svpc/format.hpp"
#include "svpc/json_io.hpp"
#include "svpc/lattice.hpp"
#include "svpc/picnn/train.hpp"
#include "svpc/ssv.hpp"

namespace svpc {

enum class TargetSource { analytic, svpc_lp };

inline const char* to_string(TargetSource s) {
  return s == TargetSource::analytic ? "analytic" : "svpc_lp";
}

inline TargetSource target_source_from_string(std::string_view s) {
  if (s == "analytic") return TargetSource::analytic;
  if (s == "svpc_lp") return TargetSource::svpc_lp;
  throw SpecError("unknown target source '" + std::string(s) + "'");
}

struct LearningTuple {
  MinorsVector m;
  std::vector<double> zeta;
  double target = 0.0;
  double phi = 0.0;
  std::uint64_t orbit_id = 0;
  TargetSource source = TargetSource::analytic;

  SsvVector nu() const { return m.ssv(); }
  friend bool operator==(const LearningTuple&, const LearningTuple&) = default;
};

enum class SplitKind { random_fraction, held_out };

/// Validation parameter values for the held-out policy: either an explicit
/// list, or `count` random draws per component in [lo, hi] combined as a
/// Cartesian product.
struct HeldOutValues {
  std::vector<std::vector<double>> explicit_values;
  std::size_t count_per_component = 0;
  std::vector<double> lo, hi;
};

struct SplitPolicy {
  SplitKind kind = SplitKind::random_fraction;
  double fraction = 0.3;  ///< random_fraction: share of tuples sent to validation
  std::uint64_t seed = 0;
  // held_out: validation tuples are fresh random nu samples at held-out
  // parameter values; every grid tuple is used for training.
  HeldOutValues values;
  std::size_t points_per_value = 0;
  double box_lo = -1.0, box_hi = 1.0;
};

struct DatasetSpec {
  EnergyModel model;
  LatticeSpec lattice;
  std::vector<std::vector<double>> parameters{{}};
  bool augment = true;
  TargetSource source = TargetSource::analytic;
  SplitPolicy split;
  // LP targets only.
  std::optional<LatticeSpec> lp_lattice;  ///< defaults to the data lattice
  SimplexOptions simplex;
  std::string envelope_cache;  ///< directory for reusable envelope files; empty disables

  void validate() const {
    lattice.validate();
    if (lp_lattice) lp_lattice->validate();
    if (parameters.empty()) throw SpecError("dataset needs at least one parameter value");
    for (const auto& z : parameters) model.check_zeta(z);
    if (source == TargetSource::analytic && !model.has_analytic_envelope())
      throw SpecError("model " + model.id() +
                      " has no analytic envelope; use target source svpc_lp");
    if (split.kind == SplitKind::random_fraction &&
        !(split.fraction > 0.0 && split.fraction < 1.0))
      throw SpecError("split fraction must lie in (0, 1)");
    if (split.kind == SplitKind::held_out) {
      if (source != TargetSource::analytic)
        throw SpecError("held-out sampling needs analytic targets at off-lattice points");
      if (split.points_per_value == 0)
        throw SpecError("held-out split needs points_per_value > 0");
      if (!(split.box_lo < split.box_hi)) throw SpecError("held-out box needs lo < hi");
      const auto& v = split.values;
      if (model.arity() > 0 && v.explicit_values.empty() && v.count_per_component == 0)
        throw SpecError("held-out split needs parameter values or a sampler");
      for (const auto& z : v.explicit_values) model.check_zeta(z);
      if (v.count_per_component > 0 &&
          (v.lo.size() != model.arity() || v.hi.size() != model.arity()))
        throw SpecError("held-out sampler bounds must have one entry per parameter");
    }
  }
};

struct Dataset {
  int d = 2;
  std::size_t p = 0;
  std::vector<LearningTuple> train;
  std::vector<LearningTuple> validation;
  json spec = json::object();
  json info = json::object();  ///< counts and reuse information

  std::size_t size() const noexcept { return train.size() + validation.size(); }
};

// --- json -------------------------------------------------------------------

inline json to_json(const SplitPolicy& s) {
  if (s.kind == SplitKind::random_fraction)
    return {{"kind", "random_fraction"}, {"fraction", s.fraction}, {"seed", s.seed}};
  json j{{"kind", "held_out"},
         {"seed", s.seed},
         {"points_per_value", s.points_per_value},
         {"box", {s.box_lo, s.box_hi}}};
  if (!s.values.explicit_values.empty()) j["values"] = s.values.explicit_values;
  if (s.values.count_per_component > 0)
    j["sample_values"] = {{"count", s.values.count_per_component},
                          {"lo", s.values.lo},
                          {"hi", s.values.hi}};
  return j;
}

inline SplitPolicy split_policy_from_json(const json& j) {
  check_keys(j, {"kind", "fraction", "seed", "points_per_value", "box", "values", "sample_values"},
             "split");
  SplitPolicy s;
  const auto kind = get_or<std::string>(j, "kind", "random_fraction");
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (kind == "random_fraction") {
    s.kind = SplitKind::random_fraction;
    s.fraction = get_or(j, "fraction", 0.3);
  } else if (kind == "held_out") {
    s.kind = SplitKind::held_out;
    s.points_per_value = get_required<std::size_t>(j, "points_per_value", "split");
    if (j.contains("box")) {
      const auto box = get_or<std::vector<double>>(j, "box", {});
      if (box.size() != 2) throw SpecError("split box must be [lo, hi]");
      s.box_lo = box[0];
      s.box_hi = box[1];
    }
    s.values.explicit_values = get_or<std::vector<std::vector<double>>>(j, "values", {});
    if (j.contains("sample_values")) {
      const auto& sv = j.at("sample_values");
      check_keys(sv, {"count", "lo", "hi"}, "split.sample_values");
      s.values.count_per_component = get_required<std::size_t>(sv, "count", "sample_values");
      s.values.lo = get_required<std::vector<double>>(sv, "lo", "sample_values");
      s.values.hi = get_required<std::vector<double>>(sv, "hi", "sample_values");
    }
  } else {
    throw SpecError("unknown split kind '" + kind + "'");
  }
  return s;
}

inline json to_json(const DatasetSpec& s) {
  json j{{"model", to_json(s.model)},
         {"lattice", to_json(s.lattice)},
         {"parameters", s.parameters},
         {"augment", s.augment},
         {"source", to_string(s.source)},
         {"split", to_json(s.split)}};
  if (s.source == TargetSource::svpc_lp) {
    if (s.lp_lattice) j["lp_lattice"] = to_json(*s.lp_lattice);
    j["solver"] = to_json(s.simplex);
  }
  return j;
}

/// Reads a dataset section. Parameter values may be given as an explicit list
/// ("parameters") or per component ("parameter_axes"), combined as a
/// Cartesian product.
inline DatasetSpec dataset_spec_from_json(const json& j, const EnergyModel& model) {
  check_keys(j, {"lattice", "parameters", "parameter_axes", "augment", "source", "split",
                 "lp_lattice", "solver", "envelope_cache"},
             "dataset");
  DatasetSpec s;
  s.model = model;
  s.lattice = lattice_spec_from_json(j.at("lattice"));
  if (j.contains("parameters") && j.contains("parameter_axes"))
    throw SpecError("dataset takes 'parameters' or 'parameter_axes', not both");
  if (j.contains("parameters")) {
    s.parameters = get_or<std::vector<std::vector<double>>>(j, "parameters", {});
  } else if (j.contains("parameter_axes")) {
    const auto axes = get_or<std::vector<std::vector<double>>>(j, "parameter_axes", {});
    std::vector<std::vector<double>> out{{}};
    for (const auto& axis : axes) {
      std::vector<std::vector<double>> next;
      for (const auto& prefix : out)
        for (double v : axis) {
          auto z = prefix;
          z.push_back(v);
          next.push_back(std::move(z));
        }
      out = std::move(next);
    }
    s.parameters = out;
  } else {
    s.parameters = {std::vector<double>(model.arity(), 0.0)};
    if (model.arity() > 0) throw SpecError("dataset for " + model.id() + " needs parameters");
  }
  s.augment = get_or(j, "augment", true);
  s.source = target_source_from_string(
      get_or<std::string>(j, "source", model.has_analytic_envelope() ? "analytic" : "svpc_lp"));
  if (j.contains("split")) s.split = split_policy_from_json(j.at("split"));
  if (j.contains("lp_lattice")) s.lp_lattice = lattice_spec_from_json(j.at("lp_lattice"));
  if (j.contains("solver")) s.simplex = simplex_options_from_json(j.at("solver"));
  s.envelope_cache = get_or<std::string>(j, "envelope_cache", "");
  s.validate();
  return s;
}

// --- generation ---------------------------------------------------------------

namespace detail {

/// Exact key of a (nu, zeta) pair; -0 is folded into +0.
inline std::vector<double> tuple_key(const SsvVector& v, std::span<const double> zeta) {
  std::vector<double> k;
  for (double x : v.values()) k.push_back(x == 0.0 ? 0.0 : x);
  for (double x : zeta) k.push_back(x == 0.0 ? 0.0 : x);
  return k;
}

inline std::vector<std::vector<double>> held_out_values(const DatasetSpec& s, std::mt19937_64& rng) {
  const auto& v = s.split.values;
  if (s.model.arity() == 0) return {{}};
  std::vector<std::vector<double>> out = v.explicit_values;
  if (v.count_per_component > 0) {
    std::vector<std::vector<double>> comps;
    for (std::size_t c = 0; c < s.model.arity(); ++c) {
      std::uniform_real_distribution<double> u(v.lo[c], v.hi[c]);
      std::vector<double> vals(v.count_per_component);
      for (auto& x : vals) x = u(rng);
      comps.push_back(vals);
    }
    std::vector<std::vector<double>> prod{{}};
    for (const auto& axis : comps) {
      std::vector<std::vector<double>> next;
      for (const auto& prefix : prod)
        for (double x : axis) {
          auto z = prefix;
          z.push_back(x);
          next.push_back(std::move(z));
        }
      prod = std::move(next);
    }
    out.insert(out.end(), prod.begin(), prod.end());
  }
  return out;
}

}  // namespace detail

/// Envelope values at the given queries for one parameter value, reusing a
/// cached field when the same computation was done before.
inline EnvelopeField lp_targets(const DatasetSpec& spec, std::span<const double> zeta,
                                const std::vector<SsvVector>& queries, unsigned threads,
                                bool* reused = nullptr) {
  const LatticeSpec lspec = spec.lp_lattice.value_or(spec.lattice);
  std::string key_path;
  if (!spec.envelope_cache.empty()) {
    json key{{"model", to_json(spec.model)},
             {"zeta", std::vector<double>(zeta.begin(), zeta.end())},
             {"lattice", to_json(lspec)},
             {"solver", to_json(spec.simplex)}};
    std::string qs;
    for (const auto& q : queries)
      for (double x : q.values()) qs += format_double(x) + ",";
    key["queries"] = fnv1a_hex(qs);
    const auto dir = std::filesystem::path(spec.envelope_cache);
    std::filesystem::create_directories(dir);
    key_path = (dir / ("envelope-" + fnv1a_hex(key.dump()) + ".csv")).string();
    if (std::filesystem::exists(key_path)) {
      EnvelopeField f = read_field_csv(key_path);
      if (f.points.size() == queries.size()) {
        bool same = true;
        for (std::size_t i = 0; i < queries.size() && same; ++i)
          same = f.points[i].query == queries[i];
        if (same) {
          if (reused) *reused = true;
          return f;
        }
      }
    }
  }
  const Lattice lat = build_lattice(lspec);
  PolyconvexifyOptions opt;
  opt.simplex = spec.simplex;
  opt.threads = threads;
  EnvelopeField f = polyconvexify(spec.model, zeta, lat, queries, opt);
  if (!key_path.empty()) write_field_csv(f, key_path);
  if (reused) *reused = false;
  return f;
}

inline Dataset generate(const DatasetSpec& spec, unsigned threads = 1) {
  spec.validate();
  const Lattice lat = build_lattice(spec.lattice);
  Dataset ds;
  ds.d = spec.lattice.d;
  ds.p = spec.model.arity();
  ds.spec = to_json(spec);

  // Grid tuples plus orbit members, deduplicated by exact key; orbit ids are
  // assigned per orbit representative in first-seen order.
  std::vector<LearningTuple> all;
  std::set<std::vector<double>> seen;
  std::map<std::vector<double>, std::uint64_t> orbit_ids;
  std::size_t dropped_domain = 0, dropped_infeasible = 0, reused = 0;
  for (const auto& zeta : spec.parameters) {
    std::vector<std::pair<SsvVector, std::uint64_t>> points;
    auto push = [&](const SsvVector& v, std::uint64_t id) {
      if (seen.insert(detail::tuple_key(v, zeta)).second) points.emplace_back(v, id);
    };
    for (const auto& v : lat.points()) {
      const auto orb = orbit(v);
      const auto rep_key = detail::tuple_key(*std::min_element(orb.begin(), orb.end()), zeta);
      const auto [it, inserted] = orbit_ids.emplace(rep_key, orbit_ids.size());
      push(v, it->second);
      if (spec.augment)
        for (const auto& w : orb) push(w, it->second);
    }
    std::vector<double> phi(points.size()), target(points.size());
    std::vector<char> ok(points.size(), 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
      phi[i] = spec.model.phi(points[i].first, zeta);
      if (!std::isfinite(phi[i])) ok[i] = 0;
    }
    if (spec.source == TargetSource::analytic) {
      for (std::size_t i = 0; i < points.size(); ++i)
        if (ok[i]) target[i] = spec.model.phi_pc(points[i].first, zeta);
    } else {
      std::vector<SsvVector> queries;
      std::vector<std::size_t> where;
      for (std::size_t i = 0; i < points.size(); ++i)
        if (ok[i]) {
          queries.push_back(points[i].first);
          where.push_back(i);
        }
      bool hit = false;
      const EnvelopeField f = lp_targets(spec, zeta, queries, threads, &hit);
      reused += hit;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        if (f.points[q].status != LpStatus::optimal) {
          ok[where[q]] = 0;
          ++dropped_infeasible;
        } else {
          target[where[q]] = f.points[q].value;
        }
      }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!ok[i]) {
        dropped_domain += std::isfinite(phi[i]) ? 0 : 1;
        continue;
      }
      if (target[i] > phi[i] + 1e-9) {
        std::string at;
        for (double x : points[i].first.values()) at += format_double(x) + " ";
        throw SpecError("envelope exceeds the density at nu = ( " + at + ") by " +
                        format_double(target[i] - phi[i]));
      }
      all.push_back({minors(points[i].first), zeta, target[i], phi[i], points[i].second,
                     spec.source});
    }
  }

  if (spec.split.kind == SplitKind::random_fraction) {
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(spec.split.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::llround(spec.split.fraction * static_cast<double>(all.size())));
    std::vector<char> is_val(all.size(), 0);
    for (std::size_t k = 0; k < n_val; ++k) is_val[idx[k]] = 1;
    for (std::size_t i = 0; i < all.size(); ++i)
      (is_val[i] ? ds.validation : ds.train).push_back(std::move(all[i]));
  } else {
    ds.train = std::move(all);
    std::mt19937_64 rng(spec.split.seed);
    const auto values = detail::held_out_values(spec, rng);
    std::uniform_real_distribution<double> u(spec.split.box_lo, spec.split.box_hi);
    std::uint64_t next_id = orbit_ids.size();
    for (const auto& zeta : values) {
      for (std::size_t k = 0; k < spec.split.points_per_value; ++k) {
        std::vector<double> nu(static_cast<std::size_t>(ds.d));
        for (auto& x : nu) x = u(rng);
        const SsvVector v(nu);
        ds.validation.push_back({minors(v), zeta, spec.model.phi_pc(v, zeta),
                                 spec.model.phi(v, zeta), next_id++, TargetSource::analytic});
      }
    }
  }
  ds.info = {{"train", ds.train.size()},
             {"validation", ds.validation.size()},
             {"dropped_outside_domain", dropped_domain},
             {"dropped_infeasible", dropped_infeasible},
             {"reused_envelopes", reused}};
  return ds;
}

inline nn::LearningSet to_learning_set(const std::vector<LearningTuple>& tuples, int d,
                                       std::size_t p) {
  nn::LearningSet s;
  s.minors_size = static_cast<std::size_t>(minors_count(d));
  s.zeta_size = p;
  for (const auto& t : tuples) s.add(t.m.values(), t.zeta, t.target, t.phi);
  return s;
}

// --- persistence ----------------------------------------------------------------

inline std::string dataset_header(int d, std::size_t p) {
  std::string h;
  for (int i = 1; i <= minors_count(d); ++i) h += "m_" + std::to_string(i) + ",";
  for (std::size_t i = 1; i <= p; ++i) h += "zeta_" + std::to_string(i) + ",";
  return h + "target,phi,orbit_id,source";
}

inline void write_tuples_csv(const std::vector<LearningTuple>& tuples, int d, std::size_t p,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << dataset_header(d, p) << '\n';
  std::string line;
  for (const auto& t : tuples) {
    line.clear();
    for (double x : t.m.values()) line += format_double(x) + ',';
    for (double x : t.zeta) line += format_double(x) + ',';
    line += format_double(t.target) + ',' + format_double(t.phi) + ',' +
            std::to_string(t.orbit_id) + ',' + to_string(t.source) + '\n';
    out << line;
  }
  if (!out) throw Error("failed writing " + path.string());
}

inline std::vector<LearningTuple> read_tuples_csv(const std::filesystem::path& path, int d,
                                                  std::size_t p) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file " + path.string(), 1, 1);
  if (line != dataset_header(d, p))
    throw ParseError("dataset header mismatch: expected '" + dataset_header(d, p) + "', got '" +
                         line + "'",
                     1, 1);
  const std::size_t K = static_cast<std::size_t>(minors_count(d));
  const std::size_t fields = K + p + 4;
  std::vector<LearningTuple> out;
  std::vector<std::string_view> cells;
  std::vector<double> m(K);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    cells.clear();
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.emplace_back(line.data() + start,
                         (comma == std::string::npos ? line.size() : comma) - start);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != fields)
      throw ParseError("expected " + std::to_string(fields) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno, 1);
    std::size_t col = 1;
    auto num = [&](std::size_t c) {
      const auto v = parse_double(cells[c]);
      if (!v) throw ParseError("bad number '" + std::string(cells[c]) + "'", lineno, col);
      col += cells[c].size() + 1;
      return *v;
    };
    LearningTuple t;
    for (std::size_t c = 0; c < K; ++c) m[c] = num(c);
    t.m = MinorsVector(std::span<const double>(m));
    for (std::size_t c = 0; c < p; ++c) t.zeta.push_back(num(K + c));
    t.target = num(K + p);
    t.phi = num(K + p + 1);
    const auto id = parse_u64(cells[K + p + 2]);
    if (!id) throw ParseError("bad orbit id '" + std::string(cells[K + p + 2]) + "'", lineno, col);
    col += cells[K + p + 2].size() + 1;
    t.orbit_id = *id;
    try {
      t.source = target_source_from_string(cells[K + p + 3]);
    } catch (const SpecError&) {
      throw ParseError("bad source '" + std::string(cells[K + p + 3]) + "'", lineno, col);
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Writes train.csv, validation.csv and dataset.json into dir.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_tuples_csv(ds.train, ds.d, ds.p, dir / "train.csv");
  write_tuples_csv(ds.validation, ds.d, ds.p, dir / "validation.csv");
  const json side{{"format", "svpc-dataset"},
                  {"version", 1},
                  {"d", ds.d},
                  {"p", ds.p},
                  {"columns", dataset_header(ds.d, ds.p)},
                  {"spec", ds.spec},
                  {"info", ds.info}};
  std::ofstream out(dir / "dataset.json", std::ios::binary);
  out << side.dump(2) << '\n';
  if (!out) throw Error("failed writing " + (dir / "dataset.json").string());
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json", std::ios::binary);
  if (!in) throw Error("cannot open " + (dir / "dataset.json").string());
  json side;
  try {
    side = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("dataset sidecar is not valid JSON: ") + e.what(), 1, e.byte);
  }
  if (side.value("format", "") != "svpc-dataset") throw SpecError("not an svpc dataset");
  Dataset ds;
  ds.d = side.at("d").get<int>();
  require_dimension(ds.d);
  ds.p = side.at("p").get<std::size_t>();
  ds.spec = side.value("spec", json::object());
  ds.info = side.value("info", json::object());
  ds.train = read_tuples_csv(dir / "train.csv", ds.d, ds.p);
  ds.validation = read_tuples_csv(dir / "validation.csv", ds.d, ds.p);
  return ds;
}

}  // namespace svpc
