#pragma once

// Run configuration: one JSON document with a section per command.
//
//   {
//     "model": {"kind": "ksd", "params": {...}},
//     "seed": 0, "threads": 1,
//     "polyconvexify": {"lattice": L, "queries": {...}, "parameters": [[...]], "solver": {...}},
//     "dataset": {...},
//     "train": {"architecture": {...}, "learning_rate": ..., ...},
//     "eval": {"grid": {...}, "parameters": [[...]], "reference_fields": [...],
//              "cross_sections": [...]}
//   }
//
// Unknown keys are rejected at every level. The top-level seed fills in any
// section seed that is not given explicitly.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "svpc/dataset.hpp"
#include "svpc/evalkit.hpp"
#include "svpc/picnn/checkpoint.hpp"

namespace svpc {

inline constexpr const char* kToolVersion = "0.1.0";

/// Architecture and penalty weights used for each model when the config
/// leaves them out.
inline nn::Architecture default_architecture(const EnergyModel& m) {
  switch (m.kind()) {
    case ModelKind::ksd: return nn::Architecture::ficnn(2, {10, 20});
    case ModelKind::gksd: return nn::Architecture::picnn(2, 2, {10, 20, 20}, {10, 20, 20});
    default: return nn::Architecture::picnn(2, 1, {30, 60, 60}, {30, 60, 60});
  }
}

inline nn::TrainConfig default_train_config(const EnergyModel& m) {
  nn::TrainConfig c;
  c.lambda_sym = 1.0;
  c.lambda_ineq = m.is_damage() ? 1.0 : 1.5;
  return c;
}

struct QuerySpec {
  std::optional<LatticeSpec> lattice;          ///< queries on a grid
  std::vector<SsvVector> points;               ///< explicit list
  std::string file;                            ///< CSV with nu_1..nu_d columns
};

struct PolyconvexifySection {
  LatticeSpec lattice;
  QuerySpec queries;  ///< all empty: query the lattice itself
  std::vector<std::vector<double>> parameters{{}};
  SimplexOptions simplex;
};

struct TrainSection {
  nn::Architecture architecture;
  nn::TrainConfig config;
  bool architecture_given = false;
};

struct GridSpec {
  double lo = -1.05, hi = 1.05;
  std::size_t n = 100;
};

struct SectionSpec {
  SectionAxis axis = SectionAxis::first;
  double t0 = -1.05, t1 = 1.05;
  std::size_t samples = 201;
  std::vector<double> zeta;
};

struct EvalSection {
  GridSpec grid;
  std::vector<std::vector<double>> parameters{{}};
  /// Envelope fields used as reference, one per parameter value, for models
  /// without an analytic envelope.
  std::vector<std::string> reference_fields;
  std::vector<SectionSpec> cross_sections;
  bool svg = true;
  bool symmetrize = false;
};

struct RunConfig {
  std::optional<EnergyModel> model;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<PolyconvexifySection> polyconvexify;
  std::optional<json> dataset;  ///< resolved lazily, needs the model
  std::optional<json> train;
  std::optional<EvalSection> eval;

  const EnergyModel& require_model() const {
    if (!model) throw SpecError("config needs a 'model' section");
    return *model;
  }
};

namespace detail {

inline std::vector<std::vector<double>> read_parameters(const json& j, const char* where) {
  if (!j.is_array()) throw SpecError(std::string(where) + ".parameters must be a list of lists");
  std::vector<std::vector<double>> out;
  for (const auto& z : j) {
    if (!z.is_array()) throw SpecError(std::string(where) + ".parameters must be a list of lists");
    out.push_back(z.get<std::vector<double>>());
  }
  if (out.empty()) throw SpecError(std::string(where) + ".parameters is empty");
  return out;
}

inline QuerySpec query_spec_from_json(const json& j) {
  check_keys(j, {"lattice", "points", "file"}, "polyconvexify.queries");
  QuerySpec q;
  int given = 0;
  if (j.contains("lattice")) {
    q.lattice = lattice_spec_from_json(j.at("lattice"));
    ++given;
  }
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) {
      const auto v = p.get<std::vector<double>>();
      q.points.emplace_back(std::span<const double>(v));
    }
    ++given;
  }
  if (j.contains("file")) {
    q.file = j.at("file").get<std::string>();
    ++given;
  }
  if (given != 1)
    throw SpecError("polyconvexify.queries needs exactly one of 'lattice', 'points', 'file'");
  return q;
}

}  // namespace detail

inline PolyconvexifySection polyconvexify_section_from_json(const json& j,
                                                            const EnergyModel& model) {
  check_keys(j, {"lattice", "queries", "parameters", "solver"}, "polyconvexify");
  PolyconvexifySection s;
  s.lattice = lattice_spec_from_json(get_required<json>(j, "lattice", "polyconvexify"));
  if (j.contains("queries")) s.queries = detail::query_spec_from_json(j.at("queries"));
  s.parameters = j.contains("parameters")
                     ? detail::read_parameters(j.at("parameters"), "polyconvexify")
                     : std::vector<std::vector<double>>{{}};
  for (const auto& z : s.parameters) model.check_zeta(z);
  if (j.contains("solver")) s.simplex = simplex_options_from_json(j.at("solver"));
  return s;
}

inline json to_json(const PolyconvexifySection& s) {
  json j{{"lattice", to_json(s.lattice)}, {"parameters", s.parameters},
         {"solver", to_json(s.simplex)}};
  if (s.queries.lattice) j["queries"] = {{"lattice", to_json(*s.queries.lattice)}};
  if (!s.queries.points.empty()) {
    json pts = json::array();
    for (const auto& p : s.queries.points)
      pts.push_back(std::vector<double>(p.values().begin(), p.values().end()));
    j["queries"] = {{"points", pts}};
  }
  if (!s.queries.file.empty()) j["queries"] = {{"file", s.queries.file}};
  return j;
}

/// Train section with model-dependent defaults; seed falls back to `seed`.
inline TrainSection train_section_from_json(const json& j, const EnergyModel& model,
                                            std::uint64_t seed) {
  json rest = j;
  TrainSection s;
  s.architecture = default_architecture(model);
  if (rest.contains("architecture")) {
    s.architecture = nn::architecture_from_json(rest.at("architecture"));
    s.architecture_given = true;
    rest.erase("architecture");
  }
  const nn::TrainConfig defaults = default_train_config(model);
  json base = nn::to_json(defaults);
  base["seed"] = seed;
  for (auto& [k, v] : rest.items()) base[k] = v;
  check_keys(rest, {"learning_rate", "batch_size", "patience", "lambda_ineq", "lambda_sym",
                    "max_epochs", "seed", "ensemble_size"},
             "train");
  s.config = nn::train_config_from_json(base);
  return s;
}

inline json to_json(const TrainSection& s) {
  json j = nn::to_json(s.config);
  j["architecture"] = nn::to_json(s.architecture);
  return j;
}

inline EvalSection eval_section_from_json(const json& j) {
  check_keys(j, {"grid", "parameters", "reference_fields", "cross_sections", "svg",
                 "symmetrize"},
             "eval");
  EvalSection s;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, {"lo", "hi", "n"}, "eval.grid");
    s.grid.lo = get_or(g, "lo", s.grid.lo);
    s.grid.hi = get_or(g, "hi", s.grid.hi);
    s.grid.n = get_or(g, "n", s.grid.n);
    if (!(s.grid.lo < s.grid.hi) || s.grid.n < 2) throw SpecError("eval.grid is degenerate");
  }
  if (j.contains("parameters")) s.parameters = detail::read_parameters(j.at("parameters"), "eval");
  s.reference_fields = get_or<std::vector<std::string>>(j, "reference_fields", {});
  if (!s.reference_fields.empty() && s.reference_fields.size() != s.parameters.size())
    throw SpecError("eval.reference_fields needs one file per parameter value");
  for (const auto& c : j.value("cross_sections", json::array())) {
    check_keys(c, {"axis", "t0", "t1", "samples", "zeta"}, "eval.cross_sections");
    SectionSpec sec;
    sec.axis = section_axis_from_string(get_or<std::string>(c, "axis", "t0"));
    sec.t0 = get_or(c, "t0", sec.t0);
    sec.t1 = get_or(c, "t1", sec.t1);
    sec.samples = get_or(c, "samples", sec.samples);
    sec.zeta = get_or<std::vector<double>>(c, "zeta", {});
    if (sec.samples < 2) throw SpecError("cross-section needs at least 2 samples");
    s.cross_sections.push_back(sec);
  }
  s.svg = get_or(j, "svg", s.svg);
  s.symmetrize = get_or(j, "symmetrize", s.symmetrize);
  return s;
}

inline json to_json(const EvalSection& s) {
  json secs = json::array();
  for (const auto& c : s.cross_sections)
    secs.push_back({{"axis", to_string(c.axis)},
                    {"t0", c.t0},
                    {"t1", c.t1},
                    {"samples", c.samples},
                    {"zeta", c.zeta}});
  json j{{"grid", {{"lo", s.grid.lo}, {"hi", s.grid.hi}, {"n", s.grid.n}}},
         {"parameters", s.parameters},
         {"cross_sections", secs},
         {"svg", s.svg},
         {"symmetrize", s.symmetrize}};
  if (!s.reference_fields.empty()) j["reference_fields"] = s.reference_fields;
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("config must be a JSON object");
  check_keys(j, {"model", "seed", "threads", "polyconvexify", "dataset", "train", "eval"},
             "config");
  RunConfig c;
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.threads = get_or<unsigned>(j, "threads", 1);
  if (j.contains("polyconvexify"))
    c.polyconvexify = polyconvexify_section_from_json(j.at("polyconvexify"), c.require_model());
  if (j.contains("dataset")) c.dataset = j.at("dataset");
  if (j.contains("train")) {
    if (!j.at("train").is_object()) throw SpecError("train section must be an object");
    c.train = j.at("train");
  }
  if (j.contains("eval")) c.eval = eval_section_from_json(j.at("eval"));
  if (c.model && c.dataset) (void)dataset_spec_from_json(*c.dataset, *c.model);
  if (c.model && c.train) (void)train_section_from_json(*c.train, *c.model, c.seed);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 1, e.byte);
  }
  return run_config_from_json(j);
}

/// Dataset section with the top-level seed applied when the split has none.
inline DatasetSpec resolve_dataset(const json& section, const EnergyModel& model,
                                   std::uint64_t seed) {
  json j = section;
  if (!j.contains("split")) j["split"] = json::object();
  if (!j["split"].contains("seed")) j["split"]["seed"] = seed;
  return dataset_spec_from_json(j, model);
}

}  // namespace svpc
