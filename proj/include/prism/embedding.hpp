#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prism/errors.hpp"
#include "prism/rng.hpp"

namespace prism {

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("dot: size mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("squared_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Unit vector on the sphere S^{d-1}, d >= 2. Construction enforces the norm
// so downstream kernel code can assume ||y|| = 1 without re-checking.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2)
      throw ShapeError("EmbeddingVector: dimension must be >= 2, got " +
                       std::to_string(values_.size()));
    double n = norm(values_);
    if (std::abs(n - 1.0) > 1e-9)
      throw ShapeError("EmbeddingVector: norm " + std::to_string(n) +
                       " is not 1 within 1e-9");
  }

  static EmbeddingVector normalized(std::vector<double> raw) {
    if (raw.size() < 2)
      throw ShapeError("EmbeddingVector::normalized: dimension must be >= 2");
    double n = norm(raw);
    if (!(n > 0.0) || !std::isfinite(n))
      throw NumericError("EmbeddingVector::normalized: zero or non-finite norm");
    for (double& x : raw) x /= n;
    return EmbeddingVector(std::move(raw));
  }

  const std::vector<double>& values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> span() const { return values_; }

 private:
  std::vector<double> values_;
};

inline EmbeddingVector random_unit_vector(Rng& rng, std::size_t d) {
  if (d < 2) throw ShapeError("random_unit_vector: dimension must be >= 2");
  std::vector<double> v(d);
  double n = 0.0;
  do {
    for (auto& x : v) x = rng.normal();
    n = norm(v);
  } while (!(n > 1e-12));  // astronomically rare retry; keeps normalization finite
  for (auto& x : v) x /= n;
  return EmbeddingVector(std::move(v));
}

}  // namespace prism
