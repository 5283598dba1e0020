#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/errors.hpp"
#include "prism/features.hpp"
#include "prism/model.hpp"
#include "prism/rng.hpp"
#include "prism/schedules.hpp"

// Mini-batch Adam training over preference pairs, with the penalty curriculum
// and warmup/cosine learning rate. Deterministic given (data, config): batch
// order, parameter init, and every update replay identically for one seed.

namespace prism {

enum class TrainMode { bt, prism };

struct TrainConfig {
  TrainMode mode = TrainMode::prism;
  Arch arch = Arch::linear;
  std::size_t hidden = 16;  // used by the tanh architecture only
  std::size_t total_steps = 4000;
  std::size_t batch_size = 64;
  double base_lr = 0.01;
  double warmup_fraction = 0.03;
  LambdaAnchors lambda1{};
  LambdaAnchors lambda2{};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.total_steps == 0) throw ConfigError("train: total_steps must be positive");
  if (cfg.batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
  if (!(cfg.base_lr > 0.0)) throw ConfigError("train: base_lr must be positive");
  if (cfg.warmup_fraction < 0.0 || cfg.warmup_fraction >= 1.0)
    throw ConfigError("train: warmup_fraction must lie in [0, 1)");
  if (cfg.arch == Arch::one_hidden_tanh && cfg.hidden == 0)
    throw ConfigError("train: hidden must be positive for the tanh architecture");
  if (!(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0) ||
      !(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0))
    throw ConfigError("train: adam betas must lie in (0, 1)");
  validate(cfg.lambda1);
  validate(cfg.lambda2);
}

// Whole training split in model space; batches are index gathers from here.
struct TrainingSet {
  std::vector<std::vector<double>> input_w, input_l;
  std::vector<std::vector<double>> feat_w, feat_l;

  std::size_t size() const { return input_w.size(); }
  std::size_t input_dim() const { return input_w.empty() ? 0 : input_w[0].size(); }
  std::size_t n_shortcuts() const { return feat_w.empty() ? 0 : feat_w[0].size(); }

  void validate() const {
    if (input_w.empty()) throw DataError("training set: empty");
    if (input_l.size() != size() || feat_w.size() != size() || feat_l.size() != size())
      throw ShapeError("training set: per-side list lengths differ");
    const std::size_t p = input_dim();
    const std::size_t j = n_shortcuts();
    if (j == 0) throw ShapeError("training set: no shortcut features");
    for (std::size_t i = 0; i < size(); ++i) {
      if (input_w[i].size() != p || input_l[i].size() != p)
        throw ShapeError("training set: ragged inputs at row " + std::to_string(i));
      if (feat_w[i].size() != j || feat_l[i].size() != j)
        throw ShapeError("training set: ragged features at row " + std::to_string(i));
    }
  }
};

// Per-shortcut bandwidth: median |feature delta| over the training pairs,
// floored so an all-tied channel cannot zero the kernel width.
inline std::vector<double> median_heuristic_widths(const TrainingSet& data) {
  data.validate();
  const std::size_t J = data.n_shortcuts();
  std::vector<double> widths(J);
  std::vector<double> deltas(data.size());
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < data.size(); ++i)
      deltas[i] = std::abs(data.feat_w[i][j] - data.feat_l[i][j]);
    std::sort(deltas.begin(), deltas.end());
    const std::size_t n = deltas.size();
    double med = (n % 2 == 1) ? deltas[n / 2]
                              : 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]);
    widths[j] = std::max(med, 1e-3);
  }
  return widths;
}

struct HistoryRow {
  std::size_t step = 0;
  double lr = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double bt_term = 0.0;
  double kinv_mean = 0.0;
  double rglobal = 0.0;
  double total_loss = 0.0;
};

struct TrainResult {
  RewardParams params;
  KernelMixConfig mix;
  std::vector<HistoryRow> history;
};

constexpr std::uint64_t kTrainStream = 0x7a41u;

inline TrainResult train(const TrainingSet& data, const TrainConfig& cfg) {
  validate(cfg);
  data.validate();
  if (cfg.batch_size > data.size())
    throw ConfigError("train: batch_size " + std::to_string(cfg.batch_size) +
                      " exceeds training set size " + std::to_string(data.size()));

  const std::size_t P = data.input_dim();
  const std::size_t J = data.n_shortcuts();
  Rng rng(derive_seed(cfg.seed, kTrainStream));

  TrainResult out;
  out.params = init_params(cfg.arch, P, cfg.hidden, rng);
  out.mix.logits.assign(J, 0.0);
  out.mix.widths = median_heuristic_widths(data);
  out.history.reserve(cfg.total_steps);

  std::vector<double> theta = flatten(out.params, out.mix.logits);
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = data.size();  // forces a shuffle before the first batch

  PreferenceBatch batch;
  batch.input_w.resize(cfg.batch_size);
  batch.input_l.resize(cfg.batch_size);
  batch.feat_w.resize(cfg.batch_size);
  batch.feat_l.resize(cfg.batch_size);

  const bool prism_mode = cfg.mode == TrainMode::prism;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const double t = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
    const double l1 = prism_mode ? lambda_schedule(t, cfg.lambda1) : 0.0;
    const double l2 = prism_mode ? lambda_schedule(t, cfg.lambda2) : 0.0;
    const double lr = lr_schedule(step, cfg.total_steps, cfg.base_lr,
                                  cfg.warmup_fraction);

    if (cursor + cfg.batch_size > data.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      std::size_t src = order[cursor + i];
      batch.input_w[i] = data.input_w[src];
      batch.input_l[i] = data.input_l[src];
      batch.feat_w[i] = data.feat_w[src];
      batch.feat_l[i] = data.feat_l[src];
    }
    cursor += cfg.batch_size;

    auto [loss, grads] = prism_loss_gradients(batch, out.params, out.mix, l1, l2);
    if (!std::isfinite(loss.total))
      throw NumericError("train: non-finite loss at step " + std::to_string(step));

    std::vector<double> g = flatten_grads(grads);
    if (!prism_mode) {
      // mixture stays frozen without the penalty terms
      for (std::size_t k = theta.size() - J; k < theta.size(); ++k) g[k] = 0.0;
    }
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step + 1));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step + 1));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
      v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
      theta[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.adam_eps);
    }
    unflatten(theta, out.params, out.mix.logits);

    out.history.push_back({step, lr, l1, l2, loss.bt_term, loss.kinv_mean,
                           loss.rglobal, loss.total});
  }
  return out;
}

// ---- checkpoint serialization ----

struct Checkpoint {
  RewardParams params;
  std::optional<KernelMixConfig> mix;  // absent for plain preference training
  Standardizer standardizer;
  std::vector<std::string> shortcut_names;
  nlohmann::json config_echo;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  validate(ck.params);
  nlohmann::json j;
  j["format_version"] = 1;
  j["arch"] = ck.params.arch == Arch::linear ? "linear" : "one_hidden_tanh";
  j["input_dim"] = ck.params.input_dim;
  j["hidden"] = ck.params.hidden;
  j["w_in"] = ck.params.w_in;
  j["b_hidden"] = ck.params.b_hidden;
  j["w_out"] = ck.params.w_out;
  j["b_out"] = ck.params.b_out;
  if (ck.mix) {
    j["mixture"] = {{"logits", ck.mix->logits}, {"widths", ck.mix->widths}};
  }
  j["standardizer"] = {{"mean", ck.standardizer.mean},
                       {"stddev", ck.standardizer.stddev}};
  j["shortcuts"] = ck.shortcut_names;
  j["config"] = ck.config_echo;
  return j;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out << checkpoint_to_json(ck).dump(2) << "\n";
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw ParseError("checkpoint " + path + ": unsupported format_version");
    Checkpoint ck;
    std::string arch = j.at("arch").get<std::string>();
    if (arch == "linear") ck.params.arch = Arch::linear;
    else if (arch == "one_hidden_tanh") ck.params.arch = Arch::one_hidden_tanh;
    else throw ParseError("checkpoint " + path + ": unknown arch '" + arch + "'");
    ck.params.input_dim = j.at("input_dim").get<std::size_t>();
    ck.params.hidden = j.at("hidden").get<std::size_t>();
    ck.params.w_in = j.at("w_in").get<std::vector<double>>();
    ck.params.b_hidden = j.at("b_hidden").get<std::vector<double>>();
    ck.params.w_out = j.at("w_out").get<std::vector<double>>();
    ck.params.b_out = j.at("b_out").get<double>();
    validate(ck.params);
    if (j.contains("mixture")) {
      KernelMixConfig mix;
      mix.logits = j.at("mixture").at("logits").get<std::vector<double>>();
      mix.widths = j.at("mixture").at("widths").get<std::vector<double>>();
      validate(mix);
      ck.mix = std::move(mix);
    }
    ck.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    ck.standardizer.stddev =
        j.at("standardizer").at("stddev").get<std::vector<double>>();
    ck.shortcut_names = j.at("shortcuts").get<std::vector<std::string>>();
    if (j.contains("config")) ck.config_echo = j.at("config");
    return ck;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace prism
