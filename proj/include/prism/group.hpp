#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prism/embedding.hpp"
#include "prism/errors.hpp"

// Finite symmetry groups acting unitarily on R^d. Elements are dense indices
// 0..size()-1 with identity at 0; compose/inverse work on indices so group
// closure is exact integer arithmetic, never floating-point.

namespace prism {

enum class GroupKind { cyclic_rotation, sign_flip, coordinate_permutation };

class GroupSpec {
 public:
  // Planar rotations by multiples of 2*pi/order in coordinates (plane_a, plane_b).
  static GroupSpec cyclic_rotation(std::size_t dim, std::size_t order,
                                   std::size_t plane_a, std::size_t plane_b) {
    if (dim < 2) throw ConfigError("cyclic_rotation: dim must be >= 2");
    if (order < 1) throw ConfigError("cyclic_rotation: order must be >= 1");
    if (plane_a >= dim || plane_b >= dim || plane_a == plane_b)
      throw ConfigError("cyclic_rotation: plane axes must be distinct and < dim");
    GroupSpec g;
    g.kind_ = GroupKind::cyclic_rotation;
    g.dim_ = dim;
    g.order_ = order;
    g.plane_a_ = plane_a;
    g.plane_b_ = plane_b;
    g.size_ = order;
    return g;
  }

  // All sign patterns on a coordinate subset; |G| = 2^|coords|.
  static GroupSpec sign_flip(std::size_t dim, std::vector<std::size_t> coords) {
    if (dim < 2) throw ConfigError("sign_flip: dim must be >= 2");
    if (coords.size() > 20)
      throw ConfigError("sign_flip: subset larger than 20 coordinates");
    std::vector<bool> seen(dim, false);
    for (std::size_t c : coords) {
      if (c >= dim) throw ConfigError("sign_flip: coordinate out of range");
      if (seen[c]) throw ConfigError("sign_flip: duplicate coordinate");
      seen[c] = true;
    }
    GroupSpec g;
    g.kind_ = GroupKind::sign_flip;
    g.dim_ = dim;
    g.coords_ = std::move(coords);
    g.size_ = std::size_t{1} << g.coords_.size();
    return g;
  }

  // Powers of one cyclic shift along the given coordinate cycle.
  static GroupSpec coordinate_permutation(std::size_t dim, std::vector<std::size_t> cycle) {
    if (dim < 2) throw ConfigError("coordinate_permutation: dim must be >= 2");
    if (cycle.empty()) throw ConfigError("coordinate_permutation: empty cycle");
    std::vector<bool> seen(dim, false);
    for (std::size_t c : cycle) {
      if (c >= dim) throw ConfigError("coordinate_permutation: coordinate out of range");
      if (seen[c]) throw ConfigError("coordinate_permutation: duplicate coordinate");
      seen[c] = true;
    }
    GroupSpec g;
    g.kind_ = GroupKind::coordinate_permutation;
    g.dim_ = dim;
    g.coords_ = std::move(cycle);
    g.size_ = g.coords_.size();
    return g;
  }

  // Single-element group; convenient identity action for any dim.
  static GroupSpec trivial(std::size_t dim) { return sign_flip(dim, {}); }

  GroupKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return size_; }
  std::size_t identity() const { return 0; }

  std::size_t compose(std::size_t a, std::size_t b) const {
    check_element(a);
    check_element(b);
    switch (kind_) {
      case GroupKind::cyclic_rotation:
        return (a + b) % size_;
      case GroupKind::sign_flip:
        return a ^ b;
      case GroupKind::coordinate_permutation:
        return (a + b) % size_;
    }
    throw ConfigError("compose: unknown group kind");
  }

  std::size_t inverse(std::size_t a) const {
    check_element(a);
    switch (kind_) {
      case GroupKind::cyclic_rotation:
      case GroupKind::coordinate_permutation:
        return (size_ - a) % size_;
      case GroupKind::sign_flip:
        return a;  // involutions
    }
    throw ConfigError("inverse: unknown group kind");
  }

  void apply_into(std::size_t elem, std::span<const double> in,
                  std::span<double> out) const {
    check_element(elem);
    if (in.size() != dim_ || out.size() != dim_)
      throw ShapeError("GroupSpec::apply: vector dim " + std::to_string(in.size()) +
                       " does not match group dim " + std::to_string(dim_));
    switch (kind_) {
      case GroupKind::cyclic_rotation: {
        for (std::size_t i = 0; i < dim_; ++i) out[i] = in[i];
        double angle = 2.0 * 3.14159265358979323846 *
                       static_cast<double>(elem) / static_cast<double>(order_);
        double c = std::cos(angle), s = std::sin(angle);
        double xa = in[plane_a_], xb = in[plane_b_];
        out[plane_a_] = c * xa - s * xb;
        out[plane_b_] = s * xa + c * xb;
        return;
      }
      case GroupKind::sign_flip: {
        for (std::size_t i = 0; i < dim_; ++i) out[i] = in[i];
        for (std::size_t t = 0; t < coords_.size(); ++t)
          if (elem & (std::size_t{1} << t)) out[coords_[t]] = -out[coords_[t]];
        return;
      }
      case GroupKind::coordinate_permutation: {
        for (std::size_t i = 0; i < dim_; ++i) out[i] = in[i];
        const std::size_t L = coords_.size();
        // value at cycle slot i moves to slot (i + elem) mod L
        for (std::size_t i = 0; i < L; ++i) out[coords_[(i + elem) % L]] = in[coords_[i]];
        return;
      }
    }
    throw ConfigError("apply: unknown group kind");
  }

  std::vector<double> apply_raw(std::size_t elem, std::span<const double> in) const {
    std::vector<double> out(dim_);
    apply_into(elem, in, out);
    return out;
  }

  EmbeddingVector apply(std::size_t elem, const EmbeddingVector& v) const {
    std::vector<double> out = apply_raw(elem, v.span());
    // unitary action preserves the norm; renormalize away rounding drift
    return EmbeddingVector::normalized(std::move(out));
  }

  std::string describe() const {
    switch (kind_) {
      case GroupKind::cyclic_rotation:
        return "cyclic-rotation(order=" + std::to_string(order_) + ", plane=(" +
               std::to_string(plane_a_) + "," + std::to_string(plane_b_) + "))";
      case GroupKind::sign_flip:
        return "sign-flip(" + std::to_string(coords_.size()) + " coords)";
      case GroupKind::coordinate_permutation:
        return "coordinate-permutation(cycle length " +
               std::to_string(coords_.size()) + ")";
    }
    return "unknown";
  }

 private:
  GroupSpec() = default;

  void check_element(std::size_t e) const {
    if (e >= size_)
      throw ConfigError("group element " + std::to_string(e) + " out of range (size " +
                        std::to_string(size_) + ")");
  }

  GroupKind kind_ = GroupKind::sign_flip;
  std::size_t dim_ = 0;
  std::size_t size_ = 1;
  std::size_t order_ = 1;                // cyclic_rotation
  std::size_t plane_a_ = 0, plane_b_ = 1;  // cyclic_rotation
  std::vector<std::size_t> coords_;      // sign_flip subset / permutation cycle
};

}  // namespace prism
