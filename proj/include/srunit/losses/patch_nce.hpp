#pragma once

#include "srunit/models/feature_head.hpp"

namespace srunit {

struct NceConfig {
  double temperature = 0.07;
  /// Negatives per query; 0 means every other sampled location of the same image.
  Index negatives_count = 0;
  Index patches_per_scale = 256;

  void validate() const {
    if (!(temperature > 0)) throw ArgumentError("NCE temperature must be > 0");
    if (negatives_count < 0) throw ArgumentError("NCE negatives_count must be >= 0");
    if (patches_per_scale < 1) throw ArgumentError("patches_per_scale must be >= 1");
  }
};

namespace detail {
template <typename Scalar>
void require_unit_rows(const Var<Scalar>& e, const char* what) {
  const auto norms = e.value().matrix().rowwise().norm();
  // An all-zero row is what the normalizer gives for a patch whose head output
  // is exactly zero (every hidden ReLU dead); it is allowed through.
  for (Index r = 0; r < norms.size(); ++r)
    if (norms[r] != Scalar(0) && std::abs(static_cast<double>(norms[r]) - 1.0) > 1e-3)
      throw InvariantError(std::string(what) + " embedding row " + std::to_string(r) + " has norm " +
                           std::to_string(static_cast<double>(norms[r])));
}
}  // namespace detail

/// (N+1)-way InfoNCE: mean over queries i of
///   -log( exp(q_i.p_i / t) / (exp(q_i.p_i / t) + sum_n exp(q_i.v_n / t)) ).
/// With `internal_negatives` the pool is the positive set itself and query i uses
/// every row except i (N = m - 1); otherwise every row of `negatives` is used.
template <typename Scalar>
Var<Scalar> patch_nce_loss(const Var<Scalar>& query, const Var<Scalar>& positive, const Var<Scalar>& negatives,
                           const NceConfig& cfg, bool internal_negatives) {
  cfg.validate();
  require_same_shape(query.shape(), positive.shape(), "patch_nce_loss query/positive");
  if (negatives.shape().rank() != 2 || negatives.shape()[1] != query.shape()[1])
    throw DimensionError("patch_nce_loss: negatives " + negatives.shape().str() + " vs queries " +
                         query.shape().str());
  detail::require_unit_rows(query, "query");
  detail::require_unit_rows(positive, "positive");
  detail::require_unit_rows(negatives, "negative");
  const Index available = internal_negatives ? negatives.shape()[0] - 1 : negatives.shape()[0];
  if (cfg.negatives_count > 0 && cfg.negatives_count != available)
    throw ArgumentError("patch_nce_loss: configured " + std::to_string(cfg.negatives_count) + " negatives, have " +
                        std::to_string(available));
  if (available < 1) throw ArgumentError("patch_nce_loss needs at least one negative");
  Var<Scalar> pos = row_dot(query, positive);
  Var<Scalar> neg = matmul(query, transpose(negatives));
  return contrastive_cross_entropy(pos, neg, static_cast<Scalar>(1.0 / cfg.temperature), internal_negatives);
}

/// Embedding-set overload: query and positive sets must share coordinates.
template <typename Scalar>
Var<Scalar> patch_nce_loss(const PatchEmbeddingSet<Scalar>& query, const PatchEmbeddingSet<Scalar>& positive,
                           const NceConfig& cfg) {
  if (query.indices.size() != positive.indices.size())
    throw DimensionError("patch_nce_loss: query/positive sets differ in size");
  for (size_t i = 0; i < query.indices.size(); ++i)
    if (!(query.indices[i] == positive.indices[i]))
      throw InvariantError("patch_nce_loss: positives are not aligned with queries");
  return patch_nce_loss(query.embeddings, positive.embeddings, positive.embeddings, cfg, true);
}

}  // namespace srunit
