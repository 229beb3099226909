#pragma once

// Subcommand implementations behind the svpc binary. Each returns the process
// exit code: 0 success, 1 usage or config error, 2 partial numerical failure.
// Data goes to files under the output directory; progress goes to `log`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svpc/config.hpp"

namespace svpc::cli {

namespace fs = std::filesystem;

struct Options {
  fs::path config;
  fs::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<fs::path> models;  ///< checkpoints
  fs::path data;                 ///< dataset directory
  fs::path queries;              ///< query CSV
  fs::path field;                ///< envelope CSV for cross-sections
  bool symmetrize = false;
  std::ostream* log = &std::cerr;
};

/// Numeric CSV with a header row.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    return std::nullopt;
  }
};

inline NumericTable read_numeric_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  NumericTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file " + path.string(), 1, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    for (std::size_t c = 0;; ++c) {
      const std::size_t end = line.find(',', start);
      const std::string_view cell(line.data() + start,
                                  (end == std::string::npos ? line.size() : end) - start);
      const auto v = parse_double(cell);
      if (!v) throw ParseError("not a number in " + path.string(), lineno, c + 1);
      row.push_back(*v);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (row.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields in " +
                           path.string(),
                       lineno, row.size());
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace detail {

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what(), 1, e.byte);
  }
}

inline void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

/// Config document with command-line overrides applied. --seed replaces the
/// top-level seed and every explicit section seed.
inline json load_config_json(const Options& o) {
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!j.is_object()) throw SpecError("config must be a JSON object");
  if (o.seed) {
    j["seed"] = *o.seed;
    if (j.contains("dataset") && j["dataset"].contains("split"))
      j["dataset"]["split"].erase("seed");
    if (j.contains("train") && j["train"].is_object()) j["train"].erase("seed");
  }
  if (o.threads) j["threads"] = *o.threads;
  return j;
}

inline json run_header(const RunConfig& c, std::string_view command) {
  json h{{"tool", "svpc"},
         {"tool_version", kToolVersion},
         {"command", command},
         {"seed", c.seed},
         {"threads", c.threads}};
  if (c.model) h["model"] = to_json(*c.model);
  return h;
}

inline std::vector<SsvVector> query_points(const QuerySpec& q, const Lattice& lat) {
  if (q.lattice) return build_lattice(*q.lattice).points();
  if (!q.points.empty()) return q.points;
  if (!q.file.empty()) {
    const auto t = read_numeric_csv(q.file);
    std::vector<std::size_t> cols;
    for (int a = 1; a <= lat.dim(); ++a) {
      const auto c = t.column("nu_" + std::to_string(a));
      if (!c) throw SpecError(q.file + " lacks column nu_" + std::to_string(a));
      cols.push_back(*c);
    }
    std::vector<SsvVector> out;
    for (const auto& r : t.rows) {
      std::vector<double> v;
      for (auto c : cols) v.push_back(r[c]);
      out.emplace_back(std::span<const double>(v));
    }
    return out;
  }
  return lat.points();
}

inline std::string param_tag(std::size_t k, std::size_t total) {
  if (total == 1) return "";
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%02zu", k);
  return buf;
}

inline void write_history_csv(const std::vector<nn::EpochRecord>& h, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "epoch,train_total,train_mse,train_ineq,train_sym,"
         "validation_total,validation_mse,validation_ineq,validation_sym\n";
  for (const auto& r : h)
    out << r.epoch << ',' << format_double(r.train.total) << ',' << format_double(r.train.mse)
        << ',' << format_double(r.train.ineq) << ',' << format_double(r.train.sym) << ','
        << format_double(r.validation.total) << ',' << format_double(r.validation.mse) << ','
        << format_double(r.validation.ineq) << ',' << format_double(r.validation.sym) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

inline EnergyModel model_for(const RunConfig& c, const json& metadata) {
  if (c.model) return *c.model;
  if (metadata.contains("model")) return model_from_json(metadata.at("model"));
  throw SpecError("no model given in the config or the checkpoint metadata");
}

struct LoadedModels {
  std::vector<nn::NetworkParams> nets;
  json metadata = json::object();
};

inline LoadedModels load_models(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw SpecError("no --model checkpoint given");
  LoadedModels m;
  for (const auto& p : paths) {
    auto ck = nn::load_checkpoint(p);
    if (!m.nets.empty() && !(ck.params.arch() == m.nets.front().arch()))
      throw SpecError("checkpoints in an ensemble must share an architecture");
    if (m.nets.empty()) m.metadata = ck.extra;
    m.nets.push_back(std::move(ck.params));
  }
  return m;
}

inline Evaluator model_evaluator(const LoadedModels& m, const EnergyModel& model,
                                 bool symmetrize) {
  const std::optional<EnergyModel> clamp =
      model.is_damage() ? std::optional<EnergyModel>(model) : std::nullopt;
  if (m.nets.size() == 1) return network(m.nets.front(), clamp, symmetrize);
  if (symmetrize) {
    auto nets = std::make_shared<const std::vector<nn::NetworkParams>>(m.nets);
    return {"ensemble", true, [nets, clamp](const SsvVector& v, std::span<const double> z) {
              const auto zz =
                  clamp ? clamp->inference_zeta(z) : std::vector<double>(z.begin(), z.end());
              std::vector<double> f;
              for (const auto& n : *nets) f.push_back(nn::symmetrize_prediction(n, v, zz));
              double mean = 0;
              for (double x : f) mean += x;
              mean /= static_cast<double>(f.size());
              double ss = 0;
              for (double x : f) ss += (x - mean) * (x - mean);
              return EvalValue{mean, std::sqrt(ss / static_cast<double>(f.size() - 1))};
            }};
  }
  return ensemble(m.nets, clamp);
}

}  // namespace detail

// --- polyconvexify ----------------------------------------------------------------

inline int cmd_polyconvexify(const Options& o) {
  const RunConfig c = run_config_from_json(detail::load_config_json(o));
  if (!c.polyconvexify) throw SpecError("config needs a 'polyconvexify' section");
  const auto& model = c.require_model();
  const auto& sec = *c.polyconvexify;
  fs::create_directories(o.out);
  const Lattice lat = build_lattice(sec.lattice);
  const auto queries = detail::query_points(sec.queries, lat);
  const PolyconvexifyOptions opt{sec.simplex, c.threads};

  json manifest = detail::run_header(c, "polyconvexify");
  manifest["fields"] = json::array();
  std::size_t infeasible = 0;
  for (std::size_t k = 0; k < sec.parameters.size(); ++k) {
    const auto& z = sec.parameters[k];
    *o.log << "polyconvexify: " << model.id() << " parameter " << (k + 1) << "/"
           << sec.parameters.size() << ", " << lat.size() << " lattice points, "
           << queries.size() << " queries\n";
    const auto field = polyconvexify(model, z, lat, queries, opt);
    const std::string name = "field" + detail::param_tag(k, sec.parameters.size()) + ".csv";
    write_field_csv(field, o.out / name);
    infeasible += field.infeasible_count();
    json entry = field.provenance;
    entry["file"] = name;
    entry["queries"] = queries.size();
    entry["infeasible"] = field.infeasible_count();
    manifest["fields"].push_back(entry);
  }
  json resolved = detail::run_header(c, "polyconvexify");
  resolved["polyconvexify"] = to_json(sec);
  detail::write_json_file(resolved, o.out / "resolved-config.json");
  detail::write_json_file(manifest, o.out / "field.json");
  if (infeasible > 0) {
    *o.log << "polyconvexify: " << infeasible << " infeasible queries\n";
    return 2;
  }
  return 0;
}

// --- gen-data ---------------------------------------------------------------------

inline int cmd_gen_data(const Options& o) {
  const RunConfig c = run_config_from_json(detail::load_config_json(o));
  if (!c.dataset) throw SpecError("config needs a 'dataset' section");
  const auto& model = c.require_model();
  const DatasetSpec spec = resolve_dataset(*c.dataset, model, c.seed);
  *o.log << "gen-data: " << model.id() << ", " << spec.parameters.size()
         << " parameter values\n";
  Dataset ds = generate(spec, c.threads);
  save_dataset(ds, o.out);
  json resolved = detail::run_header(c, "gen-data");
  resolved["dataset"] = to_json(spec);
  detail::write_json_file(resolved, o.out / "resolved-config.json");
  *o.log << "gen-data: " << ds.train.size() << " training and " << ds.validation.size()
         << " validation tuples\n";
  return 0;
}

// --- train ------------------------------------------------------------------------

inline int cmd_train(const Options& o) {
  const RunConfig c = run_config_from_json(detail::load_config_json(o));
  if (o.data.empty()) throw SpecError("train needs --data <dataset directory>");
  const Dataset ds = load_dataset(o.data);
  const EnergyModel model = detail::model_for(c, ds.spec);
  const TrainSection sec =
      train_section_from_json(c.train.value_or(json::object()), model, c.seed);
  nn::Architecture arch = sec.architecture;
  if (arch.input_size != static_cast<std::size_t>(minors_count(ds.d)) ||
      arch.zeta_size != ds.p)
    throw SpecError("architecture does not match the dataset (d=" + std::to_string(ds.d) +
                    ", p=" + std::to_string(ds.p) + ")");
  const auto tr = to_learning_set(ds.train, ds.d, ds.p);
  const auto va = to_learning_set(ds.validation, ds.d, ds.p);
  fs::create_directories(o.out);

  json meta{{"model", to_json(model)}, {"dataset", ds.spec}, {"tool_version", kToolVersion}};
  const std::size_t R = sec.config.ensemble_size;
  std::vector<nn::TrainResult> results;
  if (R == 1) {
    results.push_back(nn::train(tr, va, arch, sec.config, [&](const nn::EpochRecord& e) {
      *o.log << "epoch " << e.epoch << "  train " << format_double(e.train.total)
             << "  validation " << format_double(e.validation.total) << '\n';
    }));
  } else {
    *o.log << "train: " << R << " realizations on " << c.threads << " threads\n";
    results = nn::train_ensemble(tr, va, arch, sec.config, c.threads);
  }

  json agg = detail::run_header(c, "train");
  agg["realizations"] = json::array();
  std::vector<double> finals;
  for (std::size_t r = 0; r < R; ++r) {
    nn::TrainConfig rc = sec.config;
    rc.seed = sec.config.seed + r;
    const auto& res = results[r];
    const nn::Checkpoint ck{res.params, rc, res.history, res.best_epoch, meta};
    fs::path dir = o.out;
    if (R > 1) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "realization-%02zu", r);
      dir /= buf;
      fs::create_directories(dir);
    }
    nn::save_checkpoint(ck, dir / "checkpoint.json");
    detail::write_history_csv(res.history, dir / "history.csv");
    const auto& last = res.history.back();
    finals.push_back(last.validation.total);
    agg["realizations"].push_back({{"seed", rc.seed},
                                   {"checkpoint", fs::relative(dir / "checkpoint.json", o.out)},
                                   {"epochs", res.history.size()},
                                   {"best_epoch", res.best_epoch},
                                   {"stopped_early", res.stopped_early},
                                   {"final_train", nn::to_json(last.train)},
                                   {"final_validation", nn::to_json(last.validation)}});
  }
  double mean = 0, ss = 0;
  for (double f : finals) mean += f;
  mean /= static_cast<double>(finals.size());
  for (double f : finals) ss += (f - mean) * (f - mean);
  agg["final_validation_total"] = {
      {"mean", mean},
      {"std", finals.size() > 1 ? std::sqrt(ss / static_cast<double>(finals.size() - 1)) : 0.0}};
  detail::write_json_file(agg, o.out / "aggregate.json");
  json resolved = detail::run_header(c, "train");
  resolved["data"] = fs::absolute(o.data).lexically_normal().string();
  resolved["train"] = to_json(sec);
  detail::write_json_file(resolved, o.out / "resolved-config.json");
  return 0;
}

// --- predict ----------------------------------------------------------------------

inline int cmd_predict(const Options& o) {
  const RunConfig c = run_config_from_json(detail::load_config_json(o));
  if (o.queries.empty()) throw SpecError("predict needs --queries <csv>");
  const auto models = detail::load_models(o.models);
  const EnergyModel model = detail::model_for(c, models.metadata);
  const auto& arch = models.nets.front().arch();
  const int d = dimension_of_minors(arch.input_size);
  const bool sym = o.symmetrize || (c.eval && c.eval->symmetrize);
  const Evaluator eval = detail::model_evaluator(models, model, sym);

  const auto t = read_numeric_csv(o.queries);
  auto need = [&](const std::string& name) {
    const auto col = t.column(name);
    if (!col) throw SpecError(o.queries.string() + " lacks column " + name);
    return *col;
  };
  std::vector<std::size_t> nu_c, z_c, nuk_c;
  for (int a = 1; a <= d; ++a) nu_c.push_back(need("nu_" + std::to_string(a)));
  for (std::size_t k = 1; k <= arch.zeta_size; ++k) z_c.push_back(need("zeta_" + std::to_string(k)));
  const bool shift = model.is_damage() && t.column("nuk_1").has_value();
  if (shift)
    for (int a = 1; a <= d; ++a) nuk_c.push_back(need("nuk_" + std::to_string(a)));

  fs::create_directories(o.out);
  std::ofstream out(o.out / "predictions.csv", std::ios::binary);
  if (!out) throw Error("cannot write predictions");
  for (int a = 1; a <= d; ++a) out << "nu_" << a << ',';
  for (std::size_t k = 1; k <= arch.zeta_size; ++k) out << "zeta_" << k << ',';
  if (shift)
    for (int a = 1; a <= d; ++a) out << "nuk_" << a << ',';
  out << "prediction";
  if (eval.has_std) out << ",std";
  if (shift) out << ",shift,total";
  out << '\n';
  for (const auto& r : t.rows) {
    std::vector<double> v, z;
    for (auto col : nu_c) v.push_back(r[col]);
    for (auto col : z_c) z.push_back(r[col]);
    const SsvVector nu{std::span<const double>(v)};
    const auto val = eval.fn(nu, z);
    for (double x : v) out << format_double(x) << ',';
    for (double x : z) out << format_double(x) << ',';
    if (shift)
      for (auto col : nuk_c) out << format_double(r[col]) << ',';
    out << format_double(val.value);
    if (eval.has_std) out << ',' << format_double(val.std);
    if (shift) {
      std::vector<double> vk;
      for (auto col : nuk_c) vk.push_back(r[col]);
      const double s =
          phi_shift(SsvVector(std::span<const double>(vk)), z.at(0), model.params(), model.base());
      out << ',' << format_double(s) << ',' << format_double(val.value + s);
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing predictions");
  json resolved = detail::run_header(c, "predict");
  resolved["model"] = to_json(model);
  resolved["queries"] = fs::absolute(o.queries).lexically_normal().string();
  json ck = json::array();
  for (const auto& p : o.models) ck.push_back(fs::absolute(p).lexically_normal().string());
  resolved["checkpoints"] = ck;
  resolved["symmetrize"] = sym;
  detail::write_json_file(resolved, o.out / "resolved-config.json");
  return 0;
}

// --- eval and cross-section --------------------------------------------------------

namespace detail {

inline std::vector<Evaluator> section_evaluators(const EnergyModel& model,
                                                 const std::optional<LoadedModels>& nets,
                                                 bool symmetrize, const fs::path& field) {
  std::vector<Evaluator> ev;
  if (model.has_analytic_envelope()) ev.push_back(analytic_envelope(model));
  ev.push_back(density(model));
  if (!field.empty()) ev.push_back(field_nearest(read_field_csv(field)));
  if (nets) ev.push_back(model_evaluator(*nets, model, symmetrize));
  return ev;
}

inline void write_sections(const EvalSection& e, const std::vector<Evaluator>& ev,
                           const fs::path& out, std::ostream& log) {
  for (std::size_t i = 0; i < e.cross_sections.size(); ++i) {
    const auto& s = e.cross_sections[i];
    const Table t = cross_section(ev, s.axis, s.t0, s.t1, s.samples, s.zeta);
    const std::string stem = "cross-section-" + std::to_string(i);
    t.write_csv(out / (stem + ".csv"));
    if (e.svg) {
      std::ofstream svg(out / (stem + ".svg"), std::ios::binary);
      svg << section_svg(t, std::string("axis ") + to_string(s.axis));
    }
    log << "cross-section " << i << ": " << t.rows.size() << " samples\n";
  }
}

}  // namespace detail

inline int cmd_eval(const Options& o) {
  const RunConfig c = run_config_from_json(detail::load_config_json(o));
  const EvalSection e = c.eval.value_or(EvalSection{});
  const auto models = detail::load_models(o.models);
  const EnergyModel model = detail::model_for(c, models.metadata);
  for (const auto& z : e.parameters) model.check_zeta(z);
  fs::create_directories(o.out);

  const auto clamp = model.is_damage() ? std::optional<EnergyModel>(model) : std::nullopt;
  std::vector<Evaluator> members;
  for (const auto& n : models.nets) members.push_back(network(n, clamp, e.symmetrize));
  const Evaluator mean = detail::model_evaluator(models, model, e.symmetrize);

  // Reference grids: a uniform grid with the analytic envelope, or the
  // feasible points of stored envelope fields.
  std::vector<std::vector<SsvVector>> grids;
  std::vector<std::vector<double>> refs;
  const int d = dimension_of_minors(models.nets.front().arch().input_size);
  json grid_desc;
  if (!e.reference_fields.empty()) {
    for (const auto& f : e.reference_fields) {
      const auto field = read_field_csv(f);
      std::vector<SsvVector> g;
      std::vector<double> r;
      for (const auto& p : field.points)
        if (p.status == LpStatus::optimal) {
          g.push_back(p.query);
          r.push_back(p.value);
        }
      grids.push_back(std::move(g));
      refs.push_back(std::move(r));
    }
    grid_desc = {{"kind", "envelope_fields"}, {"files", e.reference_fields}};
  } else {
    if (!model.has_analytic_envelope())
      throw SpecError("model " + model.id() + " needs eval.reference_fields");
    const auto g = uniform_grid(d, e.grid.lo, e.grid.hi, e.grid.n);
    const auto ref = analytic_envelope(model);
    for (const auto& z : e.parameters) {
      grids.push_back(g);
      refs.push_back(evaluate_on(ref, g, z, c.threads));
    }
    grid_desc = {{"kind", "uniform"}, {"lo", e.grid.lo}, {"hi", e.grid.hi}, {"n", e.grid.n}};
  }

  json report = detail::run_header(c, "eval");
  report["convention"] = kMetricConvention;
  report["grid"] = grid_desc;
  report["symmetrize"] = e.symmetrize;
  report["parameters"] = json::array();
  for (std::size_t k = 0; k < e.parameters.size(); ++k) {
    const auto& z = e.parameters[k];
    std::vector<ErrorReport> per;
    for (const auto& m : members) {
      auto rep = error_metrics(evaluate_on(m, grids[k], z, c.threads), refs[k]);
      rep.grid = grid_desc;
      rep.zeta = z;
      per.push_back(rep);
    }
    const auto pred = evaluate_on(mean, grids[k], z, c.threads);
    auto ens = error_metrics(pred, refs[k]);
    ens.grid = grid_desc;
    ens.zeta = z;
    std::vector<double> phi(grids[k].size());
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = model.phi(grids[k][i], z);
    json entry{{"zeta", z},
               {"realizations", to_json(summarize(per))},
               {"ensemble_mean_prediction", to_json(ens)},
               {"upper_bound_violation_fraction", upper_bound_violation_fraction(pred, phi)},
               {"mean_orbit_discrepancy", mean_orbit_discrepancy(mean, grids[k], z)}};
    report["parameters"].push_back(entry);
    *o.log << "eval: zeta " << json(z).dump() << "  rel_quadratic_error "
           << format_double(ens.rel_quadratic_error) << '\n';
  }
  detail::write_json_file(report, o.out / "report.json");
  detail::write_sections(e, detail::section_evaluators(model, models, e.symmetrize, o.field),
                         o.out, *o.log);
  json resolved = detail::run_header(c, "eval");
  resolved["model"] = to_json(model);
  resolved["eval"] = to_json(e);
  json ck = json::array();
  for (const auto& p : o.models) ck.push_back(fs::absolute(p).lexically_normal().string());
  resolved["checkpoints"] = ck;
  detail::write_json_file(resolved, o.out / "resolved-config.json");
  return 0;
}

inline int cmd_cross_section(const Options& o) {
  const RunConfig c = run_config_from_json(detail::load_config_json(o));
  if (!c.eval || c.eval->cross_sections.empty())
    throw SpecError("config needs eval.cross_sections");
  std::optional<detail::LoadedModels> models;
  if (!o.models.empty()) models = detail::load_models(o.models);
  const EnergyModel model = detail::model_for(c, models ? models->metadata : json::object());
  fs::create_directories(o.out);
  detail::write_sections(*c.eval,
                         detail::section_evaluators(model, models, c.eval->symmetrize, o.field),
                         o.out, *o.log);
  json resolved = detail::run_header(c, "cross-section");
  resolved["model"] = to_json(model);
  resolved["eval"] = to_json(*c.eval);
  detail::write_json_file(resolved, o.out / "resolved-config.json");
  return 0;
}

}  // namespace svpc::cli
