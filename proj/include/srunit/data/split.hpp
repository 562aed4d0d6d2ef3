#pragma once

#include <vector>

#include "srunit/core/rng.hpp"
#include "srunit/data/histogram.hpp"

namespace srunit {

struct KMeansResult {
  std::vector<int> assignment;  // 0 or 1
  Eigen::MatrixXd centroids;    // 2 x dim
  int iterations = 0;
  bool degenerate = false;
};

/// Lloyd's algorithm for K = 2 with k-means++ seeding. Ties go to the lower
/// cluster. When all points coincide the result is a single cluster.
KMeansResult kmeans2(const std::vector<Eigen::VectorXd>& points, Rng& rng, int max_iter = 100, double tol = 1e-6);

struct SplitPlan {
  std::vector<int> cluster;      // per input sample, 1 or 2
  std::vector<Index> domain_a;   // indices into the input list (cluster 1, plus mixing)
  std::vector<Index> domain_b;   // cluster 2, plus mixing
  double mixing_percent = 0;
  bool degenerate = false;
  std::string warning;

  std::vector<Index> members(int c) const;
};

/// K-means split; with `balanced` samples are ranked by d(c1)/d(c2) and the top
/// half (largest ratios, i.e. nearest the second centroid) forms cluster 2.
SplitPlan kmeans_split(const std::vector<HistogramVector>& histograms, bool balanced, Rng& rng);

/// Amount added to a domain from an opposite cluster of `size` items.
Index mixing_count(Index size, double percent);

/// Adds floor(X% * |opposite cluster|) random opposite-cluster items to each domain.
SplitPlan apply_mixing(const SplitPlan& plan, double percent, Rng& rng);

}  // namespace srunit
