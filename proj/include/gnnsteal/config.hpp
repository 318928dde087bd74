#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnnsteal/errors.hpp"
#include "gnnsteal/harness.hpp"

namespace gnnsteal {

/// Declarative key table for RunConfig validation. Every violation is
/// collected so the user sees the full list at once; unknown keys are
/// rejected.
namespace config_detail {

struct KeySpec {
  const char* name;
  nlohmann::json::value_t type;
  bool number_ok_as_int = false;
};

inline const char* type_name(nlohmann::json::value_t t) {
  using vt = nlohmann::json::value_t;
  switch (t) {
    case vt::string: return "string";
    case vt::number_float: return "number";
    case vt::number_integer: return "integer";
    case vt::number_unsigned: return "integer";
    case vt::boolean: return "boolean";
    case vt::array: return "array";
    case vt::object: return "object";
    default: return "value";
  }
}

inline bool type_matches(const nlohmann::json& v, nlohmann::json::value_t want) {
  using vt = nlohmann::json::value_t;
  if (want == vt::number_float) return v.is_number();
  if (want == vt::number_integer || want == vt::number_unsigned)
    return v.is_number_integer() || v.is_number_unsigned();
  return v.type() == want;
}

inline void check_object(const nlohmann::json& obj, const std::string& path,
                         const std::vector<KeySpec>& keys, std::vector<std::string>& errors) {
  if (!obj.is_object()) {
    errors.push_back(path + ": expected an object");
    return;
  }
  for (const auto& [key, value] : obj.items()) {
    const KeySpec* found = nullptr;
    for (const auto& k : keys)
      if (key == k.name) {
        found = &k;
        break;
      }
    if (!found) {
      errors.push_back(path + ": unknown key '" + key + "'");
      continue;
    }
    if (!type_matches(value, found->type))
      errors.push_back(path + "." + key + ": expected " + type_name(found->type) + ", got " +
                       value.type_name());
  }
}

}  // namespace config_detail

/// Parsed and validated run configuration. Sections: dataset, target, attack,
/// sweep, defense, output; plus a top-level seed.
struct RunConfig {
  nlohmann::json raw;

  std::string dataset_spec;          // bundle path or sbm: descriptor
  Arch target_arch = Arch::GIN;
  int target_epochs = 200;
  double learning_rate = 1e-3;
  std::string target_model_dir;

  Arch surrogate_arch = Arch::GIN;
  ResponseKind response_kind = ResponseKind::Prediction;
  LossKind loss_kind = LossKind::Contrastive;
  int attack_epochs = 200;
  int head_epochs = 300;
  double tau = 1.0;
  AugmentConfig augment;
  StructureConfig structure;

  std::vector<double> sweep_budget_fractions;
  std::vector<double> sweep_sigmas;
  std::vector<Arch> sweep_surrogate_archs;
  std::vector<ResponseKind> sweep_response_kinds;
  std::vector<LossKind> sweep_loss_kinds;
  std::vector<AttackType> sweep_attack_types;
  int repetitions = 3;

  double defense_sigma = 0.0;
  bool defense_noise_predictions = false;

  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using vt = nlohmann::json::value_t;
  std::vector<std::string> errors;
  config_detail::check_object(
      j, "$",
      {{"dataset", vt::object},
       {"target", vt::object},
       {"attack", vt::object},
       {"sweep", vt::object},
       {"defense", vt::object},
       {"output", vt::object},
       {"seed", vt::number_integer}},
      errors);
  if (j.is_object()) {
    if (j.contains("dataset"))
      config_detail::check_object(j["dataset"], "$.dataset",
                                  {{"path", vt::string}, {"spec", vt::string}}, errors);
    if (j.contains("target"))
      config_detail::check_object(j["target"], "$.target",
                                  {{"arch", vt::string},
                                   {"epochs", vt::number_integer},
                                   {"learningRate", vt::number_float},
                                   {"modelDir", vt::string}},
                                  errors);
    if (j.contains("attack")) {
      config_detail::check_object(j["attack"], "$.attack",
                                  {{"surrogateArch", vt::string},
                                   {"responseKind", vt::string},
                                   {"loss", vt::string},
                                   {"epochs", vt::number_integer},
                                   {"headEpochs", vt::number_integer},
                                   {"tau", vt::number_float},
                                   {"augment", vt::object},
                                   {"structure", vt::object}},
                                  errors);
      if (j["attack"].is_object() && j["attack"].contains("augment"))
        config_detail::check_object(j["attack"]["augment"], "$.attack.augment",
                                    {{"featureMaskProb", vt::number_float},
                                     {"edgeDropProb", vt::number_float},
                                     {"epsilon", vt::number_float},
                                     {"eta", vt::number_float},
                                     {"omega", vt::number_float},
                                     {"iters", vt::number_integer}},
                                    errors);
      if (j["attack"].is_object() && j["attack"].contains("structure"))
        config_detail::check_object(j["attack"]["structure"], "$.attack.structure",
                                    {{"k", vt::number_integer},
                                     {"numHeads", vt::number_integer},
                                     {"refineIters", vt::number_integer},
                                     {"smoothnessWeight", vt::number_float},
                                     {"sparsityWeight", vt::number_float},
                                     {"connectivityWeight", vt::number_float},
                                     {"lambdaMix", vt::number_float}},
                                    errors);
    }
    if (j.contains("sweep"))
      config_detail::check_object(j["sweep"], "$.sweep",
                                  {{"budgetFractions", vt::array},
                                   {"sigmas", vt::array},
                                   {"surrogateArchs", vt::array},
                                   {"responseKinds", vt::array},
                                   {"lossKinds", vt::array},
                                   {"attackTypes", vt::array},
                                   {"repetitions", vt::number_integer}},
                                  errors);
    if (j.contains("defense"))
      config_detail::check_object(j["defense"], "$.defense",
                                  {{"sigma", vt::number_float},
                                   {"noisePredictions", vt::boolean}},
                                  errors);
    if (j.contains("output"))
      config_detail::check_object(j["output"], "$.output", {{"dir", vt::string}}, errors);
  }
  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }

  RunConfig cfg;
  cfg.raw = j;
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    if (d.contains("path")) cfg.dataset_spec = d["path"].get<std::string>();
    if (d.contains("spec")) cfg.dataset_spec = d["spec"].get<std::string>();
  }
  if (j.contains("target")) {
    const auto& t = j["target"];
    if (t.contains("arch")) cfg.target_arch = arch_from_string(t["arch"].get<std::string>());
    if (t.contains("epochs")) cfg.target_epochs = t["epochs"].get<int>();
    if (t.contains("learningRate")) cfg.learning_rate = t["learningRate"].get<double>();
    if (t.contains("modelDir")) cfg.target_model_dir = t["modelDir"].get<std::string>();
  }
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    if (a.contains("surrogateArch"))
      cfg.surrogate_arch = arch_from_string(a["surrogateArch"].get<std::string>());
    if (a.contains("responseKind"))
      cfg.response_kind = response_kind_from_string(a["responseKind"].get<std::string>());
    if (a.contains("loss")) {
      std::string s = a["loss"].get<std::string>();
      if (s == "contrastive") cfg.loss_kind = LossKind::Contrastive;
      else if (s == "rmse") cfg.loss_kind = LossKind::Rmse;
      else throw ConfigError("config: $.attack.loss must be 'contrastive' or 'rmse'");
    }
    if (a.contains("epochs")) cfg.attack_epochs = a["epochs"].get<int>();
    if (a.contains("headEpochs")) cfg.head_epochs = a["headEpochs"].get<int>();
    if (a.contains("tau")) cfg.tau = a["tau"].get<double>();
    if (a.contains("augment")) {
      const auto& g = a["augment"];
      if (g.contains("featureMaskProb"))
        cfg.augment.feature_mask_prob = g["featureMaskProb"].get<double>();
      if (g.contains("edgeDropProb")) cfg.augment.edge_drop_prob = g["edgeDropProb"].get<double>();
      if (g.contains("epsilon")) cfg.augment.epsilon = g["epsilon"].get<double>();
      if (g.contains("eta")) cfg.augment.eta = g["eta"].get<double>();
      if (g.contains("omega")) cfg.augment.omega = g["omega"].get<double>();
      if (g.contains("iters")) cfg.augment.iters = g["iters"].get<int>();
    }
    if (a.contains("structure")) {
      const auto& s = a["structure"];
      if (s.contains("k")) cfg.structure.k = s["k"].get<int>();
      if (s.contains("numHeads")) cfg.structure.num_heads = s["numHeads"].get<int>();
      if (s.contains("refineIters")) cfg.structure.refine_iters = s["refineIters"].get<int>();
      if (s.contains("smoothnessWeight"))
        cfg.structure.smoothness_weight = s["smoothnessWeight"].get<double>();
      if (s.contains("sparsityWeight"))
        cfg.structure.sparsity_weight = s["sparsityWeight"].get<double>();
      if (s.contains("connectivityWeight"))
        cfg.structure.connectivity_weight = s["connectivityWeight"].get<double>();
      if (s.contains("lambdaMix")) cfg.structure.lambda_mix = s["lambdaMix"].get<double>();
    }
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    if (s.contains("budgetFractions"))
      cfg.sweep_budget_fractions = s["budgetFractions"].get<std::vector<double>>();
    if (s.contains("sigmas")) cfg.sweep_sigmas = s["sigmas"].get<std::vector<double>>();
    if (s.contains("surrogateArchs"))
      for (const auto& v : s["surrogateArchs"])
        cfg.sweep_surrogate_archs.push_back(arch_from_string(v.get<std::string>()));
    if (s.contains("responseKinds"))
      for (const auto& v : s["responseKinds"])
        cfg.sweep_response_kinds.push_back(response_kind_from_string(v.get<std::string>()));
    if (s.contains("lossKinds"))
      for (const auto& v : s["lossKinds"]) {
        std::string lk = v.get<std::string>();
        if (lk == "contrastive") cfg.sweep_loss_kinds.push_back(LossKind::Contrastive);
        else if (lk == "rmse") cfg.sweep_loss_kinds.push_back(LossKind::Rmse);
        else throw ConfigError("config: $.sweep.lossKinds entries must be 'contrastive' or 'rmse'");
      }
    if (s.contains("attackTypes"))
      for (const auto& v : s["attackTypes"])
        cfg.sweep_attack_types.push_back(attack_type_from_string(v.get<std::string>()));
    if (s.contains("repetitions")) cfg.repetitions = s["repetitions"].get<int>();
  }
  if (j.contains("defense")) {
    const auto& d = j["defense"];
    if (d.contains("sigma")) cfg.defense_sigma = d["sigma"].get<double>();
    if (d.contains("noisePredictions"))
      cfg.defense_noise_predictions = d["noisePredictions"].get<bool>();
  }
  if (j.contains("output") && j["output"].contains("dir"))
    cfg.output_dir = j["output"]["dir"].get<std::string>();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace gnnsteal
