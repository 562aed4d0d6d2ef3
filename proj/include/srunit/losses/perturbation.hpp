#pragma once

#include <cstdint>

#include "srunit/core/rng.hpp"
#include "srunit/core/tensor.hpp"

namespace srunit {

inline constexpr double kMinPerturbation = 1e-7;

/// Feature-space perturbation tau_k: for every spatial coordinate (n, h, w) the
/// channel vector is an isotropic direction scaled to a magnitude drawn uniformly
/// from [1e-7, bound].
template <typename Scalar>
struct Perturbation {
  Tensor<Scalar> tau;         // same shape as the perturbed feature map
  Tensor<Scalar> magnitudes;  // [N, H, W], the L2 norm of each channel vector
  double bound = 0.1;
  std::uint64_t seed = 0;

  Scalar magnitude(Index n, Index h, Index w) const {
    return magnitudes.vec()[(n * magnitudes.shape()[1] + h) * magnitudes.shape()[2] + w];
  }
};

/// Deterministic in (shape, bound, seed).
template <typename Scalar>
Perturbation<Scalar> perturbation_from_seed(const Shape& shape, double bound, std::uint64_t seed) {
  if (!(bound >= kMinPerturbation))
    throw ArgumentError("perturbation bound must be >= 1e-7, got " + std::to_string(bound));
  if (shape.rank() != 4) throw DimensionError("perturbation shape must be NCHW, got " + shape.str());
  const Index n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  Perturbation<Scalar> p;
  p.tau = Tensor<Scalar>(shape);
  p.magnitudes = Tensor<Scalar>(Shape{n, h, w});
  p.bound = bound;
  p.seed = seed;
  Rng rng(seed);
  std::vector<double> dir(static_cast<size_t>(c));
  for (Index b = 0; b < n; ++b)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        double norm2 = 0;
        do {
          norm2 = 0;
          for (auto& d : dir) {
            d = rng.normal();
            norm2 += d * d;
          }
        } while (norm2 == 0.0);
        const double mag = rng.uniform(kMinPerturbation, bound);
        const double s = mag / std::sqrt(norm2);
        for (Index ch = 0; ch < c; ++ch) p.tau.at(b, ch, i, j) = static_cast<Scalar>(dir[static_cast<size_t>(ch)] * s);
        p.magnitudes.vec()[(b * h + i) * w + j] = static_cast<Scalar>(mag);
      }
  return p;
}

/// Draws one perturbation; consumes a single value from `rng`.
template <typename Scalar>
Perturbation<Scalar> sample_perturbation(const Shape& shape, double bound, Rng& rng) {
  if (!(bound >= kMinPerturbation))
    throw ArgumentError("perturbation bound must be >= 1e-7, got " + std::to_string(bound));
  return perturbation_from_seed<Scalar>(shape, bound, rng.next_u64());
}

}  // namespace srunit
