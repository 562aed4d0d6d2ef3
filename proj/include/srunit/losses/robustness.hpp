#pragma once

#include "srunit/losses/perturbation.hpp"
#include "srunit/models/feature_head.hpp"
#include "srunit/models/generator.hpp"

namespace srunit {

/// Which quantity is compared against the re-encoded perturbed translation.
enum class RobustVariant {
  Adaptive,      // F_k(G_1^k(x)) vs F_k(G_1^k(G_k^{K+1}(G_1^k(x) + tau)))
  Direct,        // F_k(G_1^k(G(x))) vs the same perturbed path
  FeatureSpace,  // the adaptive form with both F_k calls removed
};

struct RobustOptions {
  /// Let gradients reach the feature-head parameters (off: heads act as constants).
  bool train_heads = false;
  /// Cut the gradient of G_1^k(x) before the perturbation is added.
  bool stop_perturbed_input = false;
  /// Monte-Carlo samples of tau averaged per call.
  Index n_samples = 1;
};

namespace detail {

/// Per-coordinate distance / |tau| averaged over the sampled coordinates.
/// `reference` is the first argument of the distance at scale k (G_1^k(x) or
/// G_1^k(G(x))), `feat_x` is G_1^k(x) used as the perturbed entry point.
template <typename Scalar>
Var<Scalar> robust_ratio(const GeneratorSlices<Scalar>& g, const FeatureHead<Scalar>* head, Index k,
                         const Var<Scalar>& reference, const Var<Scalar>& feat_x,
                         const Perturbation<Scalar>& tau, const std::vector<Coord>& coords,
                         const RobustOptions& opt) {
  require_same_shape(feat_x.shape(), tau.tau.shape(), "perturbation");
  const Var<Scalar> entry = opt.stop_perturbed_input ? feat_x.detach() : feat_x;
  const Var<Scalar> perturbed = add_const(entry, tau.tau);
  const Var<Scalar> translated = g.slice_forward(k, g.num_slices(), perturbed);
  const Var<Scalar> reencoded = g.encode(translated, k).back();

  Var<Scalar> a, c;
  if (head) {
    a = head->extract(reference, coords, opt.train_heads).embeddings;
    c = head->extract(reencoded, coords, opt.train_heads).embeddings;
  } else {
    a = gather_positions(reference, coords);
    c = gather_positions(reencoded, coords);
  }
  Tensor<Scalar> inv(Shape{static_cast<Index>(coords.size())});
  for (size_t i = 0; i < coords.size(); ++i)
    inv.vec()[static_cast<Index>(i)] = Scalar(1) / tau.magnitude(coords[i].n, coords[i].h, coords[i].w);
  return mean(mul_const(row_norms(sub(a, c)), inv));
}

inline void check_scale(Index k, Index K) {
  if (k < 1 || k > K)
    throw ArgumentError("scale k=" + std::to_string(k) + " outside 1.." + std::to_string(K));
}

template <typename Scalar>
const FeatureHead<Scalar>* head_for(const RobustVariant v, const FeatureHead<Scalar>* head) {
  if (v == RobustVariant::FeatureSpace) return nullptr;
  if (!head) throw ArgumentError("robustness loss needs a feature head for this variant");
  return head;
}

}  // namespace detail

/// Robustness term at scale k with an explicit perturbation. `feat_x` must be
/// G_1^k(x); `feat_gx` must be G_1^k(G(x)) when `variant` is Direct.
template <typename Scalar>
Var<Scalar> robustness_term(const GeneratorSlices<Scalar>& g, const FeatureHead<Scalar>* head, Index k,
                            const Var<Scalar>& feat_x, const Var<Scalar>& feat_gx, const Perturbation<Scalar>& tau,
                            const std::vector<Coord>& coords, RobustVariant variant, const RobustOptions& opt = {}) {
  detail::check_scale(k, g.K());
  const auto* h = detail::head_for(variant, head);
  const Var<Scalar>& reference = variant == RobustVariant::Direct ? feat_gx : feat_x;
  if (!reference.defined()) throw ArgumentError("direct robustness term needs G_1^k(G(x))");
  return detail::robust_ratio(g, h, k, reference, feat_x, tau, coords, opt);
}

/// Shared driver: encodes x, draws n_samples perturbations and averages.
template <typename Scalar>
Var<Scalar> robustness_loss(const GeneratorSlices<Scalar>& g, const FeatureHead<Scalar>* head, const Var<Scalar>& x,
                            Index k, double bound, Rng& rng, const std::vector<Coord>& coords, RobustVariant variant,
                            const RobustOptions& opt = {}) {
  detail::check_scale(k, g.K());
  if (opt.n_samples < 1) throw ArgumentError("n_samples must be >= 1");
  const Var<Scalar> feat_x = g.encode(x, k).back();
  Var<Scalar> feat_gx;
  if (variant == RobustVariant::Direct) feat_gx = g.encode(g.forward(x), k).back();
  VarList<Scalar> terms;
  for (Index s = 0; s < opt.n_samples; ++s) {
    const auto tau = sample_perturbation<Scalar>(feat_x.shape(), bound, rng);
    terms.push_back(robustness_term(g, head, k, feat_x, feat_gx, tau, coords, variant, opt));
  }
  return weighted_sum(terms, std::vector<Scalar>(terms.size(), Scalar(1) / static_cast<Scalar>(terms.size())));
}

/// L_k with one fresh perturbation.
template <typename Scalar>
Var<Scalar> robustness_loss_k(const GeneratorSlices<Scalar>& g, const FeatureHead<Scalar>& head, const Var<Scalar>& x,
                              Index k, double bound, Rng& rng, const std::vector<Coord>& coords,
                              const RobustOptions& opt = {}) {
  return robustness_loss(g, &head, x, k, bound, rng, coords, RobustVariant::Adaptive, opt);
}

/// L'_k, the direct variant.
template <typename Scalar>
Var<Scalar> direct_robustness_loss_k(const GeneratorSlices<Scalar>& g, const FeatureHead<Scalar>& head,
                                     const Var<Scalar>& x, Index k, double bound, Rng& rng,
                                     const std::vector<Coord>& coords, const RobustOptions& opt = {}) {
  return robustness_loss(g, &head, x, k, bound, rng, coords, RobustVariant::Direct, opt);
}

/// The feature-head-free robustness term (ablation E3).
template <typename Scalar>
Var<Scalar> e3_loss(const GeneratorSlices<Scalar>& g, const Var<Scalar>& x, Index k, double bound, Rng& rng,
                    const std::vector<Coord>& coords, const RobustOptions& opt = {}) {
  return robustness_loss<Scalar>(g, nullptr, x, k, bound, rng, coords, RobustVariant::FeatureSpace, opt);
}

/// Mean of the robustness terms over `active_scales` (1-based; empty = all K), each
/// on `patches` coordinates per sample sampled from `rng` at that scale.
template <typename Scalar>
Var<Scalar> robust_loss_total(const GeneratorSlices<Scalar>& g, const HeadList<Scalar>& heads, const Var<Scalar>& x,
                              double bound, Rng& rng, std::vector<Index> active_scales, Index patches,
                              RobustVariant variant = RobustVariant::Adaptive, const RobustOptions& opt = {}) {
  if (active_scales.empty())
    for (Index k = 1; k <= g.K(); ++k) active_scales.push_back(k);
  const auto shapes = g.slice_output_shapes(x.shape());
  VarList<Scalar> terms;
  for (Index k : active_scales) {
    detail::check_scale(k, g.K());
    const Shape& s = shapes[static_cast<size_t>(k - 1)];
    const auto coords = sample_batch_patch_indices(rng, s[0], s[2], s[3], std::min(patches, s[2] * s[3]));
    const FeatureHead<Scalar>* head = variant == RobustVariant::FeatureSpace ? nullptr : &heads.at(static_cast<size_t>(k - 1));
    terms.push_back(robustness_loss(g, head, x, k, bound, rng, coords, variant, opt));
  }
  return weighted_sum(terms, std::vector<Scalar>(terms.size(), Scalar(1) / static_cast<Scalar>(terms.size())));
}

}  // namespace srunit
