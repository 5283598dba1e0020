#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/errors.hpp"
#include "prism/feature_map.hpp"
#include "prism/group.hpp"
#include "prism/kernel.hpp"
#include "prism/model.hpp"
#include "prism/rng.hpp"

// Held-out evaluation: strict pairwise accuracy, reward/shortcut correlation
// with permutation p-values, report emission with canonical formatting, and
// the feature-map-vs-oracle convergence benchmark.

namespace prism {

// fraction of pairs the model ranks correctly; ties count as incorrect
inline double accuracy(const RewardParams& params,
                       const std::vector<std::vector<double>>& input_w,
                       const std::vector<std::vector<double>>& input_l) {
  if (input_w.empty()) throw DataError("accuracy: empty split");
  if (input_w.size() != input_l.size())
    throw ShapeError("accuracy: side lengths differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < input_w.size(); ++i)
    if (reward_forward(params, input_w[i]) > reward_forward(params, input_l[i]))
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(input_w.size());
}

// rewards for every response, winners first then losers; this pooling order is
// the contract shared with the feature columns handed to correlation_analysis
inline std::vector<double> pooled_rewards(
    const RewardParams& params, const std::vector<std::vector<double>>& input_w,
    const std::vector<std::vector<double>>& input_l) {
  if (input_w.size() != input_l.size())
    throw ShapeError("pooled_rewards: side lengths differ");
  std::vector<double> out;
  out.reserve(2 * input_w.size());
  for (const auto& x : input_w) out.push_back(reward_forward(params, x));
  for (const auto& x : input_l) out.push_back(reward_forward(params, x));
  return out;
}

struct CorrelationReport {
  std::vector<std::string> names;
  std::vector<double> pcc;
  std::vector<double> p_values;  // empty when permutations were disabled
};

inline constexpr std::uint64_t kPermutationStream = 0x9e11ab01;

// PCC of the reward against each raw feature column, with a permutation test:
// p is the fraction of seeded reward shuffles whose |PCC| reaches the observed
inline CorrelationReport correlation_analysis(
    const std::vector<double>& rewards,
    const std::vector<std::vector<double>>& columns,
    const std::vector<std::string>& names, std::size_t n_permutations = 1000,
    std::uint64_t seed = 0) {
  if (columns.size() != names.size())
    throw ShapeError("correlation_analysis: a name per column is required");
  CorrelationReport report;
  report.names = names;
  for (const auto& col : columns)
    report.pcc.push_back(pearson_corr(rewards, col));
  if (n_permutations == 0) return report;
  Rng rng(derive_seed(seed, kPermutationStream));
  std::vector<std::size_t> exceed(columns.size(), 0);
  std::vector<double> shuffled = rewards;
  for (std::size_t t = 0; t < n_permutations; ++t) {
    rng.shuffle(shuffled);
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (std::abs(pearson_corr(shuffled, columns[j])) >=
          std::abs(report.pcc[j]))
        ++exceed[j];
  }
  for (std::size_t j = 0; j < columns.size(); ++j)
    report.p_values.push_back(static_cast<double>(exceed[j]) /
                              static_cast<double>(n_permutations));
  return report;
}

struct SplitReport {
  std::string split;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::vector<std::string> shortcut_names;
  std::vector<double> pcc;
  std::vector<double> p_values;  // empty when not computed
};

struct EvalReport {
  std::vector<SplitReport> splits;
  nlohmann::ordered_json config_echo = nlohmann::ordered_json::object();
};

// canonical float convention for reports: 6 significant digits
inline double round6(double x) {
  if (!std::isfinite(x)) throw NumericError("round6: non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::strtod(buf, nullptr);
}

inline std::string format6(double x) {
  if (!std::isfinite(x)) throw NumericError("format6: non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  // plain (key-sorted) json gives canonical bytes
  nlohmann::json j;
  j["config"] = report.config_echo;
  j["splits"] = nlohmann::json::array();
  for (const SplitReport& s : report.splits) {
    nlohmann::json row;
    row["split"] = s.split;
    row["n"] = s.n;
    row["accuracy"] = round6(s.accuracy);
    nlohmann::json pcc = nlohmann::json::object();
    for (std::size_t k = 0; k < s.shortcut_names.size(); ++k)
      pcc["pcc_" + s.shortcut_names[k]] = round6(s.pcc[k]);
    row["pcc"] = pcc;
    if (!s.p_values.empty()) {
      nlohmann::json pv = nlohmann::json::object();
      for (std::size_t k = 0; k < s.shortcut_names.size(); ++k)
        pv["p_" + s.shortcut_names[k]] = round6(s.p_values[k]);
      row["p_values"] = pv;
    }
    j["splits"].push_back(row);
  }
  return j;
}

inline std::string report_csv(const EvalReport& report) {
  std::string out = "split,n,accuracy";
  const std::vector<std::string>* names =
      report.splits.empty() ? nullptr : &report.splits.front().shortcut_names;
  if (names)
    for (const auto& name : *names) out += ",pcc_" + name;
  out += '\n';
  for (const SplitReport& s : report.splits) {
    if (names && s.shortcut_names != *names)
      throw ShapeError("report_csv: splits disagree on shortcut names");
    out += s.split + ',' + std::to_string(s.n) + ',' + format6(s.accuracy);
    for (double v : s.pcc) out += ',' + format6(v);
    out += '\n';
  }
  return out;
}

inline void emit_report(const EvalReport& report, const std::string& path,
                        const std::string& format) {
  std::string payload;
  if (format == "json")
    payload = report_to_json(report).dump(2) + "\n";
  else if (format == "csv")
    payload = report_csv(report);
  else
    throw ConfigError("emit_report: format must be 'json' or 'csv'");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << payload;
  if (!out) throw IoError("failed while writing '" + path + "'");
}

struct KernelBenchConfig {
  std::vector<std::size_t> m_values{125, 250, 500, 1000, 2000};
  std::vector<std::size_t> n_values{64};
  std::vector<std::size_t> group_orders{8};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t dim = 8;
  std::size_t pairs = 20;
  double s = 1.1;
  std::size_t quadrature_bins = 512;
};

inline void validate(const KernelBenchConfig& cfg) {
  for (std::size_t m : cfg.m_values)
    if (m < 1) throw ConfigError("kernel bench: m values must be >= 1");
  for (std::size_t n : cfg.n_values)
    if (n < 1) throw ConfigError("kernel bench: n values must be >= 1");
  for (std::size_t q : cfg.group_orders)
    if (q < 1) throw ConfigError("kernel bench: group orders must be >= 1");
  if (cfg.dim < 2) throw ConfigError("kernel bench: dim must be >= 2");
  if (cfg.pairs < 1) throw ConfigError("kernel bench: pairs must be >= 1");
  if (!(cfg.s > 1.0) || !(cfg.s < 2.0))
    throw ConfigError("kernel bench: s must lie in (1, 2)");
  if (cfg.quadrature_bins < 16)
    throw ConfigError("kernel bench: quadrature_bins must be >= 16");
}

struct KernelBenchRow {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t group_order = 0;
  std::uint64_t seed = 0;
  double mean_abs_err = 0.0;
  double max_abs_err = 0.0;
};

inline constexpr std::uint64_t kBenchPairStream = 0xbe9c4a17;

// |feature_map inner - quadrature oracle| statistics over random sphere pairs,
// one row per (m, n, group order, seed) combination in configuration order
inline std::vector<KernelBenchRow> kernel_convergence_bench(
    const KernelBenchConfig& cfg) {
  validate(cfg);
  std::vector<KernelBenchRow> rows;
  for (std::size_t q : cfg.group_orders) {
    GroupSpec group = q == 1 ? GroupSpec::trivial(cfg.dim)
                             : GroupSpec::cyclic_rotation(cfg.dim, q, 0, 1);
    for (std::size_t n : cfg.n_values) {
      for (std::size_t m : cfg.m_values) {
        for (std::uint64_t seed : cfg.seeds) {
          FeatureMapConfig fm_cfg;
          fm_cfg.m_templates = m;
          fm_cfg.n_bins = n;
          fm_cfg.s = cfg.s;
          fm_cfg.seed = seed;
          auto templates = sample_templates(fm_cfg, cfg.dim);
          Rng pair_rng(derive_seed(seed, kBenchPairStream));
          double sum = 0.0, worst = 0.0;
          for (std::size_t p = 0; p < cfg.pairs; ++p) {
            EmbeddingVector y_w = random_unit_vector(pair_rng, cfg.dim);
            EmbeddingVector y_l = random_unit_vector(pair_rng, cfg.dim);
            FeatureMatrix phi_w = feature_map(y_w, templates, group, fm_cfg);
            FeatureMatrix phi_l = feature_map(y_l, templates, group, fm_cfg);
            double approx = feature_map_inner(phi_w, phi_l);
            double exact = kernel_cdf_oracle(y_w, y_l, group, cfg.s,
                                             cfg.quadrature_bins);
            double err = std::abs(approx - exact);
            sum += err;
            worst = std::max(worst, err);
          }
          KernelBenchRow row;
          row.m = m;
          row.n = n;
          row.group_order = q;
          row.seed = seed;
          row.mean_abs_err = sum / static_cast<double>(cfg.pairs);
          row.max_abs_err = worst;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

inline std::string bench_csv(const std::vector<KernelBenchRow>& rows) {
  std::string out = "m,n,group_order,seed,mean_abs_err,max_abs_err\n";
  for (const KernelBenchRow& r : rows) {
    out += std::to_string(r.m) + ',' + std::to_string(r.n) + ',' +
           std::to_string(r.group_order) + ',' + std::to_string(r.seed) + ',' +
           format6(r.mean_abs_err) + ',' + format6(r.max_abs_err) + '\n';
  }
  return out;
}

inline void write_bench_csv(const std::vector<KernelBenchRow>& rows,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << bench_csv(rows);
  if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace prism
