#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "prism/cache.hpp"
#include "prism/errors.hpp"
#include "prism/text.hpp"

// Shortcut feature extraction over (prompt, response) text. Rule features are
// computed locally; attribute scores go through the judge callback when
// enabled, otherwise through the lexicon heuristics. Every value is memoized
// in an LRU cache keyed by (feature, prompt hash, response hash).

namespace prism {

inline const std::vector<std::string>& known_feature_names() {
  static const std::vector<std::string> names{
      "length", "ttr", "tone", "sycophancy", "creativity", "helpfulness",
      "sentiment"};
  return names;
}

inline bool is_rule_feature(const std::string& name) {
  return name == "length" || name == "ttr";
}

// Attributes the judge service can score; sentiment stays heuristic-only.
inline bool is_judge_attribute(const std::string& name) {
  return name == "tone" || name == "sycophancy" || name == "creativity" ||
         name == "helpfulness";
}

struct FeatureExtractorConfig {
  std::vector<std::string> features;
  bool use_judge = false;
  std::size_t cache_capacity = 10000;
};

inline void validate(const FeatureExtractorConfig& cfg) {
  if (cfg.features.empty())
    throw ConfigError("feature extractor: feature list must not be empty");
  if (cfg.cache_capacity == 0)
    throw ConfigError("feature extractor: cache_capacity must be positive");
  std::unordered_set<std::string> seen;
  const auto& known = known_feature_names();
  for (const auto& f : cfg.features) {
    if (std::find(known.begin(), known.end(), f) == known.end())
      throw ConfigError("feature extractor: unknown feature '" + f + "'");
    if (!seen.insert(f).second)
      throw ConfigError("feature extractor: duplicate feature '" + f + "'");
  }
}

struct FeatureCacheKey {
  std::string feature;
  std::uint64_t prompt_hash;
  std::uint64_t response_hash;
  bool operator==(const FeatureCacheKey&) const = default;
};

struct FeatureCacheKeyHash {
  std::size_t operator()(const FeatureCacheKey& k) const {
    std::uint64_t h = fnv1a64(k.feature);
    h ^= k.prompt_hash + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= k.response_hash + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

class FeatureExtractor {
 public:
  using JudgeFn =
      std::function<double(const std::string& attribute, const std::string& prompt,
                           const std::string& response)>;

  FeatureExtractor(FeatureExtractorConfig cfg, Lexicon lexicon,
                   JudgeFn judge = nullptr)
      : cfg_(std::move(cfg)),
        lexicon_(std::move(lexicon)),
        judge_(std::move(judge)),
        cache_(cfg_.cache_capacity) {
    validate(cfg_);
    if (cfg_.use_judge && !judge_)
      throw ConfigError("feature extractor: use_judge set but no judge wired");
  }

  // Values in config order; pure in (prompt, response, config, lexicon).
  std::vector<double> extract_all(const std::string& prompt,
                                  const std::string& response) {
    std::vector<double> out;
    out.reserve(cfg_.features.size());
    const std::uint64_t ph = fnv1a64(prompt);
    const std::uint64_t rh = fnv1a64(response);
    for (const auto& name : cfg_.features) {
      FeatureCacheKey key{name, ph, rh};
      if (auto hit = cache_.get(key)) {
        out.push_back(*hit);
        continue;
      }
      double v = compute(name, prompt, response);
      cache_.put(key, v);
      out.push_back(v);
    }
    return out;
  }

  const std::vector<std::string>& feature_names() const { return cfg_.features; }
  std::size_t cache_hits() const { return cache_.hits(); }
  std::size_t cache_misses() const { return cache_.misses(); }

 private:
  double compute(const std::string& name, const std::string& prompt,
                 const std::string& response) {
    if (name == "length") return length_feature(response);
    if (name == "ttr") return ttr_feature(response);
    if (cfg_.use_judge && is_judge_attribute(name)) {
      try {
        return judge_(name, prompt, response);
      } catch (const JudgeError& e) {
        throw JudgeError("feature '" + name + "': " + e.what());
      }
    }
    return heuristic_score(name, response, lexicon_);
  }

  FeatureExtractorConfig cfg_;
  Lexicon lexicon_;
  JudgeFn judge_;
  LruCache<FeatureCacheKey, double, FeatureCacheKeyHash> cache_;
};

// Column-wise z-scoring fitted on training data and reused verbatim on eval
// splits. Sample standard deviation (ddof = 1) with an epsilon floor so
// constant features map to zero instead of dividing by zero.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 2)
      throw DataError("standardizer: need at least 2 samples, got " +
                      std::to_string(rows.size()));
    const std::size_t d = rows[0].size();
    for (const auto& r : rows)
      if (r.size() != d) throw ShapeError("standardizer: ragged feature rows");
    Standardizer out;
    out.mean.assign(d, 0.0);
    out.stddev.assign(d, 0.0);
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) out.mean[j] += r[j];
    for (std::size_t j = 0; j < d; ++j) out.mean[j] /= n;
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) {
        double c = r[j] - out.mean[j];
        out.stddev[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j)
      out.stddev[j] = std::sqrt(out.stddev[j] / (n - 1.0));
    return out;
  }

  std::vector<double> transform(const std::vector<double>& row) const {
    if (row.size() != mean.size())
      throw ShapeError("standardizer: row size does not match fitted dimension");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      out[j] = (row[j] - mean[j]) / (stddev[j] + 1e-8);
    return out;
  }
};

}  // namespace prism
