#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prism/embedding.hpp"
#include "prism/errors.hpp"
#include "prism/group.hpp"
#include "prism/rng.hpp"

// Empirical CDF feature map. For response y, template t_j and group G,
//
//   phi(k, j) = (1 / (|G| sqrt(m))) * #{ i : <g_i t_j, y> <= s k / n },
//
// for k = -n..n. Inner products between two maps use tau-quadrature weighting
// (s / n) so they approximate the integral kernel the map linearizes; the
// stored entries themselves are the unweighted counts above.

namespace prism {

struct FeatureMapConfig {
  std::size_t m_templates = 2000;
  std::size_t n_bins = 64;
  double s = 1.1;  // threshold range scale, strictly inside (1, 2)
  std::uint64_t seed = 0;
};

inline void validate(const FeatureMapConfig& cfg) {
  if (cfg.m_templates < 1) throw ConfigError("feature map: m_templates must be >= 1");
  if (cfg.n_bins < 1) throw ConfigError("feature map: n_bins must be >= 1");
  if (!(cfg.s > 1.0) || !(cfg.s < 2.0))
    throw ConfigError("feature map: s must lie in (1, 2), got " + std::to_string(cfg.s));
}

constexpr std::uint64_t kTemplateStream = 0x7e3a915cu;

// Unit-norm template directions. Sampling is sequential, so the first m
// templates for a given seed are a prefix of any longer sample.
inline std::vector<EmbeddingVector> sample_templates(const FeatureMapConfig& cfg,
                                                     std::size_t d) {
  validate(cfg);
  if (d < 2) throw ShapeError("sample_templates: dimension must be >= 2");
  Rng rng(derive_seed(cfg.seed, kTemplateStream));
  std::vector<EmbeddingVector> out;
  out.reserve(cfg.m_templates);
  for (std::size_t j = 0; j < cfg.m_templates; ++j)
    out.push_back(random_unit_vector(rng, d));
  return out;
}

class FeatureMatrix {
 public:
  FeatureMatrix(std::size_t n_bins, std::size_t m_templates, double s)
      : n_bins_(n_bins), m_(m_templates), s_(s), data_((2 * n_bins + 1) * m_templates, 0.0) {}

  std::size_t n_bins() const { return n_bins_; }
  std::size_t m_templates() const { return m_; }
  double s() const { return s_; }
  std::size_t rows() const { return 2 * n_bins_ + 1; }

  // k runs over [-n_bins, n_bins]
  double at(std::ptrdiff_t k, std::size_t j) const {
    return data_[index(k, j)];
  }
  double& at(std::ptrdiff_t k, std::size_t j) { return data_[index(k, j)]; }

  std::span<const double> column(std::size_t j) const {
    return std::span<const double>(data_.data() + j * rows(), rows());
  }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t index(std::ptrdiff_t k, std::size_t j) const {
    if (k < -static_cast<std::ptrdiff_t>(n_bins_) ||
        k > static_cast<std::ptrdiff_t>(n_bins_))
      throw ShapeError("FeatureMatrix: row index " + std::to_string(k) + " out of range");
    if (j >= m_) throw ShapeError("FeatureMatrix: column index out of range");
    return j * rows() + static_cast<std::size_t>(k + static_cast<std::ptrdiff_t>(n_bins_));
  }

  std::size_t n_bins_;
  std::size_t m_;
  double s_;
  std::vector<double> data_;
};

inline FeatureMatrix feature_map(const EmbeddingVector& y,
                                 const std::vector<EmbeddingVector>& templates,
                                 const GroupSpec& group, const FeatureMapConfig& cfg) {
  validate(cfg);
  if (templates.size() != cfg.m_templates)
    throw ShapeError("feature_map: got " + std::to_string(templates.size()) +
                     " templates, config says " + std::to_string(cfg.m_templates));
  if (y.dim() != group.dim())
    throw ShapeError("feature_map: vector dim does not match group dim");

  const std::size_t G = group.size();
  const std::size_t n = cfg.n_bins;
  const std::size_t m = cfg.m_templates;

  // <g t, y> = <t, g^{-1} y> for unitary g; precompute the inverse orbit of y
  std::vector<std::vector<double>> orbit(G);
  for (std::size_t i = 0; i < G; ++i)
    orbit[i] = group.apply_raw(group.inverse(i), y.span());

  FeatureMatrix out(n, m, cfg.s);
  const double scale = 1.0 / (static_cast<double>(G) * std::sqrt(static_cast<double>(m)));
  std::vector<double> dots(G);
  for (std::size_t j = 0; j < m; ++j) {
    if (templates[j].dim() != y.dim())
      throw ShapeError("feature_map: template dim mismatch at index " + std::to_string(j));
    for (std::size_t i = 0; i < G; ++i) dots[i] = dot(templates[j].span(), orbit[i]);
    std::sort(dots.begin(), dots.end());
    std::size_t pos = 0;  // dots[0..pos) <= current threshold
    for (std::ptrdiff_t k = -static_cast<std::ptrdiff_t>(n);
         k <= static_cast<std::ptrdiff_t>(n); ++k) {
      const double tau = cfg.s * static_cast<double>(k) / static_cast<double>(n);
      while (pos < G && dots[pos] <= tau) ++pos;
      out.at(k, j) = static_cast<double>(pos) * scale;
    }
  }
  return out;
}

// Quadrature-weighted inner product: (s / n) * sum_{k,j} a(k,j) b(k,j).
// The weight is the tau grid spacing, making this a Riemann approximation of
// the integral these features discretize.
inline double feature_map_inner(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.n_bins() != b.n_bins() || a.m_templates() != b.m_templates())
    throw ShapeError("feature_map_inner: shape mismatch");
  if (a.s() != b.s())
    throw ShapeError("feature_map_inner: threshold scales differ");
  const auto& da = a.data();
  const auto& db = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) s += da[i] * db[i];
  return (a.s() / static_cast<double>(a.n_bins())) * s;
}

}  // namespace prism
