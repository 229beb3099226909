#pragma once

// Checkpoints are JSON documents; see docs/checkpoint-format.md.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svpc/errors.hpp"
#include "svpc/json_io.hpp"
#include "svpc/picnn/train.hpp"

namespace svpc::nn {

inline constexpr const char* kCheckpointFormat = "svpc-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline json to_json(const Architecture& a) {
  json j{{"variant", to_string(a.variant)},
         {"input_size", a.input_size},
         {"zeta_size", a.zeta_size},
         {"hidden", a.hidden}};
  if (a.variant == Variant::picnn) j["zeta_hidden"] = a.zeta_hidden;
  return j;
}

inline Architecture architecture_from_json(const json& j) {
  check_keys(j, {"variant", "input_size", "zeta_size", "hidden", "zeta_hidden", "d"},
             "architecture");
  Architecture a;
  a.variant = variant_from_string(get_or<std::string>(j, "variant", "ficnn"));
  if (j.contains("d") && j.contains("input_size"))
    throw SpecError("architecture takes either 'd' or 'input_size', not both");
  a.input_size = j.contains("d")
                     ? static_cast<std::size_t>(minors_count(get_required<int>(j, "d", "architecture")))
                     : get_or<std::size_t>(j, "input_size", 3);
  a.zeta_size = get_or<std::size_t>(j, "zeta_size", 0);
  a.hidden = get_required<std::vector<std::size_t>>(j, "hidden", "architecture");
  a.zeta_hidden = get_or<std::vector<std::size_t>>(j, "zeta_hidden", {});
  a.validate();
  return a;
}

inline json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"patience", c.patience},           {"lambda_ineq", c.lambda_ineq},
          {"lambda_sym", c.lambda_sym},       {"max_epochs", c.max_epochs},
          {"seed", c.seed},                   {"ensemble_size", c.ensemble_size}};
}

inline TrainConfig train_config_from_json(const json& j) {
  check_keys(j, {"learning_rate", "batch_size", "patience", "lambda_ineq", "lambda_sym",
                 "max_epochs", "seed", "ensemble_size"},
             "train");
  TrainConfig c;
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.patience = get_or(j, "patience", c.patience);
  c.lambda_ineq = get_or(j, "lambda_ineq", c.lambda_ineq);
  c.lambda_sym = get_or(j, "lambda_sym", c.lambda_sym);
  c.max_epochs = get_or(j, "max_epochs", c.max_epochs);
  c.seed = get_or(j, "seed", c.seed);
  c.ensemble_size = get_or(j, "ensemble_size", c.ensemble_size);
  c.validate();
  return c;
}

inline json to_json(const LossParts& l) {
  return {{"total", l.total}, {"mse", l.mse}, {"ineq", l.ineq}, {"sym", l.sym}};
}

inline LossParts loss_parts_from_json(const json& j) {
  return {j.at("total").get<double>(), j.at("mse").get<double>(), j.at("ineq").get<double>(),
          j.at("sym").get<double>()};
}

struct Checkpoint {
  NetworkParams params;
  std::optional<TrainConfig> config;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  json extra = json::object();  ///< free-form metadata (model, data provenance)
};

inline json to_json(const Checkpoint& c) {
  json tensors = json::array();
  for (const auto& t : c.params.tensors())
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"data", t.data}});
  json history = json::array();
  for (const auto& h : c.history)
    history.push_back({{"epoch", h.epoch},
                       {"train", to_json(h.train)},
                       {"validation", to_json(h.validation)}});
  json j{{"format", kCheckpointFormat},
         {"version", kCheckpointVersion},
         {"architecture", to_json(c.params.arch())},
         {"tensors", tensors},
         {"history", history},
         {"best_epoch", c.best_epoch},
         {"metadata", c.extra}};
  if (c.config) {
    j["train_config"] = to_json(*c.config);
    j["seed"] = c.config->seed;
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat)
    throw SpecError("not an svpc checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw SpecError("unsupported checkpoint version " + j.value("version", json()).dump());
  Checkpoint c;
  c.params = NetworkParams(architecture_from_json(j.at("architecture")));
  const auto& ts = j.at("tensors");
  auto& mine = c.params.tensors();
  if (!ts.is_array() || ts.size() != mine.size())
    throw SpecError("checkpoint tensor list does not match the architecture");
  for (std::size_t k = 0; k < mine.size(); ++k) {
    const auto& t = ts[k];
    if (t.at("name").get<std::string>() != mine[k].name ||
        t.at("rows").get<std::size_t>() != mine[k].rows ||
        t.at("cols").get<std::size_t>() != mine[k].cols)
      throw SpecError("checkpoint tensor '" + t.at("name").get<std::string>() +
                      "' does not match the architecture");
    auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != mine[k].data.size())
      throw SpecError("checkpoint tensor '" + mine[k].name + "' has the wrong size");
    mine[k].data = std::move(data);
  }
  if (j.contains("train_config")) c.config = train_config_from_json(j.at("train_config"));
  for (const auto& h : j.value("history", json::array()))
    c.history.push_back({h.at("epoch").get<std::size_t>(), loss_parts_from_json(h.at("train")),
                         loss_parts_from_json(h.at("validation"))});
  c.best_epoch = j.value("best_epoch", std::size_t{0});
  c.extra = j.value("metadata", json::object());
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(c).dump(1) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what(), 1, e.byte);
  }
  return checkpoint_from_json(j);
}

}  // namespace svpc::nn
