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

namespace prism {

inline double rbf_kernel(std::span<const double> a, std::span<const double> b,
                         double width) {
  if (!(width > 0.0)) throw ConfigError("rbf_kernel: width must be positive");
  return std::exp(-squared_distance(a, b) / (width * width));
}

// Group-averaged kernel by full double enumeration:
//   (1/|G|^2) sum_{g,g'} rbf(g y_w, g' y_l).
// Invariant under the group action on either argument by construction.
inline double kernel_bruteforce(const EmbeddingVector& y_w, const EmbeddingVector& y_l,
                                const GroupSpec& group, double rbf_width) {
  if (y_w.dim() != group.dim() || y_l.dim() != group.dim())
    throw ShapeError("kernel_bruteforce: vector dim does not match group dim");
  const std::size_t G = group.size();
  if (G == 0) throw ConfigError("kernel_bruteforce: empty group");
  std::vector<std::vector<double>> ow(G), ol(G);
  for (std::size_t i = 0; i < G; ++i) {
    ow[i] = group.apply_raw(i, y_w.span());
    ol[i] = group.apply_raw(i, y_l.span());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < G; ++j) acc += rbf_kernel(ow[i], ol[j], rbf_width);
  return acc / (static_cast<double>(G) * static_cast<double>(G));
}

// Mean Euclidean distance over the two orbits, scaled by 1/sqrt(2 pi d).
inline double orbit_distance(const EmbeddingVector& y_w, const EmbeddingVector& y_l,
                             const GroupSpec& group) {
  if (y_w.dim() != group.dim() || y_l.dim() != group.dim())
    throw ShapeError("orbit_distance: vector dim does not match group dim");
  const std::size_t G = group.size();
  std::vector<std::vector<double>> ow(G), ol(G);
  for (std::size_t i = 0; i < G; ++i) {
    ow[i] = group.apply_raw(i, y_w.span());
    ol[i] = group.apply_raw(i, y_l.span());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < G; ++j) acc += std::sqrt(squared_distance(ow[i], ol[j]));
  const double avg = acc / (static_cast<double>(G) * static_cast<double>(G));
  const double d = static_cast<double>(y_w.dim());
  return avg / std::sqrt(2.0 * 3.14159265358979323846 * d);
}

constexpr std::uint64_t kOracleTemplateStream = 0x0c1efeedu;

// Reference value of the integral the CDF features approximate:
//   K_s = E_t [ integral_{-s}^{s} psi_w(tau; t) psi_l(tau; t) dtau ],
//   psi(tau; t) = (1/|G|) #{ i : <g_i t, y> <= tau }.
// Monte Carlo over its own template sample (independent of any feature map
// seed) and midpoint quadrature over tau. Used as the test oracle for
// feature_map_inner convergence.
inline double kernel_cdf_oracle(const EmbeddingVector& y_w, const EmbeddingVector& y_l,
                                const GroupSpec& group, double s,
                                std::size_t quadrature_bins,
                                std::size_t n_templates = 8192,
                                std::uint64_t seed = 0x0eac1e) {
  if (!(s > 1.0) || !(s < 2.0))
    throw ConfigError("kernel_cdf_oracle: s must lie in (1, 2)");
  if (quadrature_bins < 16)
    throw ConfigError("kernel_cdf_oracle: quadrature_bins must be >= 16");
  if (n_templates < 1) throw ConfigError("kernel_cdf_oracle: n_templates must be >= 1");
  if (y_w.dim() != group.dim() || y_l.dim() != group.dim())
    throw ShapeError("kernel_cdf_oracle: vector dim does not match group dim");

  const std::size_t G = group.size();
  const std::size_t B = quadrature_bins;
  std::vector<std::vector<double>> ow(G), ol(G);
  for (std::size_t i = 0; i < G; ++i) {
    ow[i] = group.apply_raw(group.inverse(i), y_w.span());
    ol[i] = group.apply_raw(group.inverse(i), y_l.span());
  }

  Rng rng(derive_seed(seed, kOracleTemplateStream));
  std::vector<double> dw(G), dl(G);
  const double bin = 2.0 * s / static_cast<double>(B);
  double total = 0.0;
  for (std::size_t t = 0; t < n_templates; ++t) {
    EmbeddingVector tmpl = random_unit_vector(rng, y_w.dim());
    for (std::size_t i = 0; i < G; ++i) {
      dw[i] = dot(tmpl.span(), ow[i]);
      dl[i] = dot(tmpl.span(), ol[i]);
    }
    std::sort(dw.begin(), dw.end());
    std::sort(dl.begin(), dl.end());
    std::size_t pw = 0, pl = 0;
    double acc = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double tau = -s + bin * (static_cast<double>(b) + 0.5);
      while (pw < G && dw[pw] <= tau) ++pw;
      while (pl < G && dl[pl] <= tau) ++pl;
      acc += static_cast<double>(pw) * static_cast<double>(pl);
    }
    total += acc / (static_cast<double>(G) * static_cast<double>(G)) * bin;
  }
  return total / static_cast<double>(n_templates);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty input");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

// Learnable mixture of per-shortcut RBF bumps used inside the margin penalty.
struct KernelMixConfig {
  std::vector<double> logits;  // mixture weights via softmax
  std::vector<double> widths;  // per-shortcut bandwidths, strictly positive
};

inline void validate(const KernelMixConfig& mix) {
  if (mix.logits.size() != mix.widths.size())
    throw ShapeError("kernel mixture: logits/widths size mismatch");
  if (mix.logits.empty()) throw ShapeError("kernel mixture: empty");
  for (double w : mix.widths)
    if (!(w > 0.0)) throw ConfigError("kernel mixture: widths must be positive");
}

// K_inv(f_w, f_l) = sum_j alpha_j exp(-(f_w[j] - f_l[j])^2 / omega_j^2),
// alpha = softmax(logits). Output lies in (0, 1].
inline double kernel_inv(std::span<const double> feat_w, std::span<const double> feat_l,
                         const KernelMixConfig& mix) {
  validate(mix);
  if (feat_w.size() != mix.logits.size() || feat_l.size() != mix.logits.size())
    throw ShapeError("kernel_inv: feature vector size does not match mixture size");
  std::vector<double> alpha = softmax(mix.logits);
  double acc = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    double d = feat_w[j] - feat_l[j];
    acc += alpha[j] * std::exp(-(d * d) / (mix.widths[j] * mix.widths[j]));
  }
  return acc;
}

}  // namespace prism
