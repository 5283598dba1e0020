#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/datagen.hpp"
#include "prism/errors.hpp"
#include "prism/eval.hpp"
#include "prism/features.hpp"
#include "prism/judge.hpp"
#include "prism/train.hpp"

// One JSON document configures every pipeline stage. The defaults below are
// the complete schema: user files and --set overrides may only touch keys that
// exist here, so typos fail loudly instead of silently running defaults.

namespace prism {

inline nlohmann::ordered_json default_config() {
  return nlohmann::ordered_json{
      {"data",
       {
           {"mode", "vector"},
           {"d_g", 16},
           {"d_s", 2},
           {"rho_id", 0.95},
           {"rho_ood", 0.05},
           {"n_train", 4000},
           {"n_id_test", 1000},
           {"n_ood_test", 1000},
           {"noise_std", 0.1},
           {"shortcut_gap", 0.2},
           {"seed", 0},
       }},
      {"features",
       {
           {"names", nlohmann::ordered_json::array({"length", "sycophancy"})},
           {"use_judge", false},
           {"cache_capacity", 10000},
       }},
      {"judge",
       {
           {"mode", "fake"},
           {"endpoint", ""},
           {"model", "judge-model"},
           {"api_key", ""},
           {"max_concurrency", 4},
           {"max_retries", 2},
           {"timeout_seconds", 30},
           {"backoff_base_seconds", 0.5},
           {"cache_path", ""},
           {"fallback_enabled", true},
       }},
      {"model",
       {
           {"arch", "linear"},
           {"hidden", 16},
       }},
      {"train",
       {
           {"mode", "prism"},
           {"total_steps", 4000},
           {"batch_size", 64},
           {"base_lr", 0.01},
           {"warmup_fraction", 0.03},
           {"lambda1",
            {{"start", 0.01}, {"mid", 0.1}, {"end", 0.06}}},
           {"lambda2",
            {{"start", 0.01}, {"mid", 0.1}, {"end", 0.06}}},
           {"adam_beta1", 0.9},
           {"adam_beta2", 0.999},
           {"adam_eps", 1e-8},
           {"seed", 0},
       }},
      {"eval",
       {
           {"n_permutations", 1000},
           {"permutation_seed", 0},
           {"bench",
            {
                {"m_values",
                 nlohmann::ordered_json::array({125, 250, 500, 1000, 2000})},
                {"n_values", nlohmann::ordered_json::array({64})},
                {"group_orders", nlohmann::ordered_json::array({8})},
                {"seeds", nlohmann::ordered_json::array({0, 1, 2, 3, 4})},
                {"dim", 8},
                {"pairs", 20},
                {"s", 1.1},
                {"quadrature_bins", 512},
            }},
       }},
  };
}

namespace detail {

// overlay may only refine keys the base document already has
inline void merge_into(nlohmann::ordered_json& base,
                       const nlohmann::json& overlay,
                       const std::string& path) {
  if (!overlay.is_object())
    throw ConfigError("config section '" + (path.empty() ? "<root>" : path) +
                      "' must be an object");
  for (const auto& [key, value] : overlay.items()) {
    std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key))
      throw ConfigError("unknown config key '" + here + "'");
    if (base.at(key).is_object()) {
      merge_into(base.at(key), value, here);
    } else {
      if (value.is_object())
        throw ConfigError("config key '" + here + "' does not take an object");
      base.at(key) = value;
    }
  }
}

inline const nlohmann::ordered_json& leaf(const nlohmann::ordered_json& doc,
                                          const std::string& section,
                                          const std::string& key) {
  return doc.at(section).at(key);
}

inline double as_number(const nlohmann::ordered_json& v,
                        const std::string& name) {
  if (!v.is_number())
    throw ConfigError("config key '" + name + "' must be a number");
  return v.get<double>();
}

inline std::size_t as_count(const nlohmann::ordered_json& v,
                            const std::string& name) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::size_t>(v.get<std::int64_t>());
  throw ConfigError("config key '" + name +
                    "' must be a non-negative integer");
}

inline std::uint64_t as_seed(const nlohmann::ordered_json& v,
                             const std::string& name) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config key '" + name +
                    "' must be a non-negative integer");
}

inline std::string as_string(const nlohmann::ordered_json& v,
                             const std::string& name) {
  if (!v.is_string())
    throw ConfigError("config key '" + name + "' must be a string");
  return v.get<std::string>();
}

inline bool as_bool(const nlohmann::ordered_json& v, const std::string& name) {
  if (!v.is_boolean())
    throw ConfigError("config key '" + name + "' must be a boolean");
  return v.get<bool>();
}

}  // namespace detail

struct RunConfig {
  SyntheticSpec data;
  FeatureExtractorConfig features;
  JudgeConfig judge;
  TrainConfig train;
  std::size_t n_permutations = 1000;
  std::uint64_t permutation_seed = 0;
  KernelBenchConfig bench;
  nlohmann::ordered_json effective;  // the defaults-merged document
};

inline RunConfig parse_run_config(const nlohmann::ordered_json& doc) {
  using detail::as_bool;
  using detail::as_count;
  using detail::as_number;
  using detail::as_seed;
  using detail::as_string;
  using detail::leaf;

  RunConfig out;
  out.effective = doc;
  try {

  std::string data_mode = as_string(leaf(doc, "data", "mode"), "data.mode");
  if (data_mode == "vector")
    out.data.mode = DataMode::vector;
  else if (data_mode == "text")
    out.data.mode = DataMode::text;
  else
    throw ConfigError("config key 'data.mode' must be 'vector' or 'text'");
  out.data.d_g = as_count(leaf(doc, "data", "d_g"), "data.d_g");
  out.data.d_s = as_count(leaf(doc, "data", "d_s"), "data.d_s");
  out.data.rho_id = as_number(leaf(doc, "data", "rho_id"), "data.rho_id");
  out.data.rho_ood = as_number(leaf(doc, "data", "rho_ood"), "data.rho_ood");
  out.data.n_train = as_count(leaf(doc, "data", "n_train"), "data.n_train");
  out.data.n_id_test =
      as_count(leaf(doc, "data", "n_id_test"), "data.n_id_test");
  out.data.n_ood_test =
      as_count(leaf(doc, "data", "n_ood_test"), "data.n_ood_test");
  out.data.noise_std =
      as_number(leaf(doc, "data", "noise_std"), "data.noise_std");
  out.data.shortcut_gap =
      as_number(leaf(doc, "data", "shortcut_gap"), "data.shortcut_gap");
  out.data.seed = as_seed(leaf(doc, "data", "seed"), "data.seed");
  try {
    validate(out.data);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }

  const auto& names = leaf(doc, "features", "names");
  if (!names.is_array())
    throw ConfigError("config key 'features.names' must be an array");
  out.features.features.clear();
  for (const auto& v : names)
    out.features.features.push_back(as_string(v, "features.names"));
  out.features.use_judge =
      as_bool(leaf(doc, "features", "use_judge"), "features.use_judge");
  out.features.cache_capacity = as_count(
      leaf(doc, "features", "cache_capacity"), "features.cache_capacity");
  try {
    validate(out.features);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("features: ") + e.what());
  }

  std::string judge_mode = as_string(leaf(doc, "judge", "mode"), "judge.mode");
  if (judge_mode == "fake")
    out.judge.mode = JudgeMode::fake;
  else if (judge_mode == "http")
    out.judge.mode = JudgeMode::http;
  else
    throw ConfigError("config key 'judge.mode' must be 'fake' or 'http'");
  out.judge.endpoint = as_string(leaf(doc, "judge", "endpoint"), "judge.endpoint");
  out.judge.model = as_string(leaf(doc, "judge", "model"), "judge.model");
  out.judge.api_key = as_string(leaf(doc, "judge", "api_key"), "judge.api_key");
  out.judge.max_concurrency = static_cast<int>(as_count(
      leaf(doc, "judge", "max_concurrency"), "judge.max_concurrency"));
  out.judge.max_retries = static_cast<int>(
      as_count(leaf(doc, "judge", "max_retries"), "judge.max_retries"));
  out.judge.timeout_seconds = as_number(leaf(doc, "judge", "timeout_seconds"),
                                        "judge.timeout_seconds");
  out.judge.backoff_base_seconds =
      as_number(leaf(doc, "judge", "backoff_base_seconds"),
                "judge.backoff_base_seconds");
  out.judge.cache_path =
      as_string(leaf(doc, "judge", "cache_path"), "judge.cache_path");
  out.judge.fallback_enabled = as_bool(leaf(doc, "judge", "fallback_enabled"),
                                       "judge.fallback_enabled");
  try {
    validate(out.judge);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("judge: ") + e.what());
  }

  std::string arch = as_string(leaf(doc, "model", "arch"), "model.arch");
  if (arch == "linear")
    out.train.arch = Arch::linear;
  else if (arch == "one_hidden_tanh")
    out.train.arch = Arch::one_hidden_tanh;
  else
    throw ConfigError(
        "config key 'model.arch' must be 'linear' or 'one_hidden_tanh'");
  out.train.hidden = as_count(leaf(doc, "model", "hidden"), "model.hidden");

  std::string train_mode = as_string(leaf(doc, "train", "mode"), "train.mode");
  if (train_mode == "bt")
    out.train.mode = TrainMode::bt;
  else if (train_mode == "prism")
    out.train.mode = TrainMode::prism;
  else
    throw ConfigError("config key 'train.mode' must be 'bt' or 'prism'");
  out.train.total_steps =
      as_count(leaf(doc, "train", "total_steps"), "train.total_steps");
  out.train.batch_size =
      as_count(leaf(doc, "train", "batch_size"), "train.batch_size");
  out.train.base_lr = as_number(leaf(doc, "train", "base_lr"), "train.base_lr");
  out.train.warmup_fraction = as_number(leaf(doc, "train", "warmup_fraction"),
                                        "train.warmup_fraction");
  for (auto [anchors, key] :
       {std::pair{&out.train.lambda1, "lambda1"},
        std::pair{&out.train.lambda2, "lambda2"}}) {
    const auto& sec = leaf(doc, "train", key);
    if (!sec.is_object())
      throw ConfigError(std::string("config key 'train.") + key +
                        "' must be an object");
    anchors->start =
        as_number(sec.at("start"), std::string("train.") + key + ".start");
    anchors->mid = as_number(sec.at("mid"), std::string("train.") + key + ".mid");
    anchors->end = as_number(sec.at("end"), std::string("train.") + key + ".end");
  }
  out.train.adam_beta1 =
      as_number(leaf(doc, "train", "adam_beta1"), "train.adam_beta1");
  out.train.adam_beta2 =
      as_number(leaf(doc, "train", "adam_beta2"), "train.adam_beta2");
  out.train.adam_eps = as_number(leaf(doc, "train", "adam_eps"), "train.adam_eps");
  out.train.seed = as_seed(leaf(doc, "train", "seed"), "train.seed");
  try {
    validate(out.train);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }

  out.n_permutations = as_count(leaf(doc, "eval", "n_permutations"),
                                "eval.n_permutations");
  out.permutation_seed = as_seed(leaf(doc, "eval", "permutation_seed"),
                                 "eval.permutation_seed");
  const auto& bench = doc.at("eval").at("bench");
  auto counts = [&](const char* key) {
    const auto& arr = bench.at(key);
    if (!arr.is_array())
      throw ConfigError(std::string("config key 'eval.bench.") + key +
                        "' must be an array");
    std::vector<std::size_t> out_v;
    for (const auto& v : arr)
      out_v.push_back(as_count(v, std::string("eval.bench.") + key));
    return out_v;
  };
  out.bench.m_values = counts("m_values");
  out.bench.n_values = counts("n_values");
  out.bench.group_orders = counts("group_orders");
  {
    const auto& arr = bench.at("seeds");
    if (!arr.is_array())
      throw ConfigError("config key 'eval.bench.seeds' must be an array");
    out.bench.seeds.clear();
    for (const auto& v : arr)
      out.bench.seeds.push_back(as_seed(v, "eval.bench.seeds"));
  }
  out.bench.dim = as_count(bench.at("dim"), "eval.bench.dim");
  out.bench.pairs = as_count(bench.at("pairs"), "eval.bench.pairs");
  out.bench.s = as_number(bench.at("s"), "eval.bench.s");
  out.bench.quadrature_bins =
      as_count(bench.at("quadrature_bins"), "eval.bench.quadrature_bins");
  try {
    validate(out.bench);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("eval.bench: ") + e.what());
  }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config document is incomplete: ") +
                      e.what());
  }
  return out;
}

inline nlohmann::ordered_json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config file '" + path + "': " + e.what());
  }
}

// "--set section.key=value"; the value is JSON when it parses, else a string
inline void apply_set_override(nlohmann::ordered_json& doc,
                               const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set needs the form section.key=value, got '" +
                      assignment + "'");
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);

  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::ordered_json* node = &doc;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos
                                             ? std::string::npos
                                             : dot - start);
    if (key.empty() || !node->contains(key))
      throw ConfigError("unknown config key '" + path + "'");
    if (dot == std::string::npos) {
      if (node->at(key).is_object())
        throw ConfigError("config key '" + path +
                          "' is a section, not a value");
      node->at(key) = value;
      return;
    }
    node = &node->at(key);
    if (!node->is_object())
      throw ConfigError("config key '" + path.substr(0, dot) +
                        "' has no sub-keys");
    start = dot + 1;
  }
}

// environment may override judge credentials only
inline void apply_env_overrides(nlohmann::ordered_json& doc) {
  if (const char* endpoint = std::getenv("PRISM_JUDGE_ENDPOINT"))
    doc.at("judge").at("endpoint") = endpoint;
  if (const char* key = std::getenv("PRISM_JUDGE_KEY"))
    doc.at("judge").at("api_key") = key;
}

// defaults <- file <- environment <- --set, later layers winning
inline nlohmann::ordered_json effective_config(
    const std::optional<std::string>& config_path,
    const std::vector<std::string>& set_overrides, bool read_env = true) {
  nlohmann::ordered_json doc = default_config();
  if (config_path) {
    nlohmann::ordered_json file = load_config_file(*config_path);
    detail::merge_into(doc, file, "");
  }
  if (read_env) apply_env_overrides(doc);
  for (const std::string& assignment : set_overrides)
    apply_set_override(doc, assignment);
  return doc;
}

}  // namespace prism
