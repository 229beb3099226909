#pragma once

// JSON conversions for specs and parameters. Readers are strict: unknown keys
// are rejected so that a typo in a run configuration cannot silently fall
// back to a default.

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "svpc/energy.hpp"
#include "svpc/errors.hpp"
#include "svpc/lattice.hpp"
#include "svpc/simplex.hpp"

namespace svpc {

using json = nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view where) {
  if (!j.is_object()) throw SpecError(std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok)
      throw SpecError("unknown key '" + item.key() + "' in " + std::string(where));
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SpecError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_required(const json& j, const char* key, std::string_view where) {
  if (!j.contains(key))
    throw SpecError("missing key '" + std::string(key) + "' in " + std::string(where));
  return get_or<T>(j, key, T{});
}

// --- lattice ---------------------------------------------------------------

inline json to_json(const Segment& s) {
  json j{{"lo", s.lo},
         {"hi", s.hi},
         {"count", s.count},
         {"spacing", s.spacing == Spacing::uniform ? "uniform" : "quadratic"}};
  if (s.spacing == Spacing::quadratic) j["refine_toward"] = s.refine_toward;
  return j;
}

inline Segment segment_from_json(const json& j) {
  check_keys(j, {"lo", "hi", "count", "spacing", "refine_toward"}, "lattice segment");
  Segment s;
  s.lo = get_required<double>(j, "lo", "lattice segment");
  s.hi = get_required<double>(j, "hi", "lattice segment");
  s.count = get_required<std::size_t>(j, "count", "lattice segment");
  const auto spacing = get_or<std::string>(j, "spacing", "uniform");
  if (spacing == "uniform")
    s.spacing = Spacing::uniform;
  else if (spacing == "quadratic")
    s.spacing = Spacing::quadratic;
  else
    throw SpecError("unknown spacing '" + spacing + "'");
  s.refine_toward = get_or<double>(j, "refine_toward", 0.0);
  return s;
}

inline json to_json(const LatticeSpec& spec) {
  json axes = json::array();
  for (const auto& segs : spec.axes) {
    json a = json::array();
    for (const auto& s : segs) a.push_back(to_json(s));
    axes.push_back(a);
  }
  return {{"d", spec.d}, {"axes", axes}};
}

inline LatticeSpec lattice_spec_from_json(const json& j) {
  check_keys(j, {"d", "axes", "axis"}, "lattice");
  LatticeSpec spec;
  spec.d = get_or<int>(j, "d", 2);
  auto read_axis = [](const json& a) {
    if (!a.is_array()) throw SpecError("lattice axis must be an array of segments");
    std::vector<Segment> segs;
    for (const auto& s : a) segs.push_back(segment_from_json(s));
    return segs;
  };
  if (j.contains("axis") == j.contains("axes"))
    throw SpecError("lattice needs exactly one of 'axis' or 'axes'");
  if (j.contains("axis")) {
    spec.axes.push_back(read_axis(j.at("axis")));
  } else {
    for (const auto& a : j.at("axes")) spec.axes.push_back(read_axis(a));
  }
  spec.validate();
  return spec;
}

// --- models ----------------------------------------------------------------

inline json to_json(const MaterialParams& mp) {
  return {{"mu", mp.mu},
          {"lambda", mp.lambda},
          {"d0", mp.d0},
          {"d_inf", mp.d_inf},
          {"alpha_inf", mp.alpha_inf}};
}

inline json to_json(const EnergyModel& m) {
  json j{{"kind", m.id()}};
  if (m.is_damage()) j["params"] = to_json(m.params());
  return j;
}

inline EnergyModel model_from_json(const json& j) {
  check_keys(j, {"kind", "params"}, "model");
  const auto kind = model_kind_from_string(get_required<std::string>(j, "kind", "model"));
  MaterialParams mp;
  if (j.contains("params")) {
    const auto& p = j.at("params");
    check_keys(p, {"mu", "lambda", "d0", "d_inf", "alpha_inf"}, "model.params");
    mp.mu = get_or(p, "mu", mp.mu);
    mp.lambda = get_or(p, "lambda", mp.lambda);
    mp.d0 = get_or(p, "d0", mp.d0);
    mp.d_inf = get_or(p, "d_inf", mp.d_inf);
    mp.alpha_inf = get_or(p, "alpha_inf", mp.alpha_inf);
  }
  return EnergyModel(kind, mp);
}

// --- solver ----------------------------------------------------------------

inline json to_json(const SimplexOptions& o) {
  return {{"pivot_tol", o.pivot_tol},
          {"feasibility_tol", o.feasibility_tol},
          {"optimality_tol", o.optimality_tol},
          {"stall_limit", o.stall_limit},
          {"iteration_factor", o.iteration_factor}};
}

inline SimplexOptions simplex_options_from_json(const json& j) {
  check_keys(j, {"pivot_tol", "feasibility_tol", "optimality_tol", "stall_limit",
                 "iteration_factor"},
             "solver");
  SimplexOptions o;
  o.pivot_tol = get_or(j, "pivot_tol", o.pivot_tol);
  o.feasibility_tol = get_or(j, "feasibility_tol", o.feasibility_tol);
  o.optimality_tol = get_or(j, "optimality_tol", o.optimality_tol);
  o.stall_limit = get_or(j, "stall_limit", o.stall_limit);
  o.iteration_factor = get_or(j, "iteration_factor", o.iteration_factor);
  return o;
}

}  // namespace svpc
