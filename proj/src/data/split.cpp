#include "srunit/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace srunit {

KMeansResult kmeans2(const std::vector<Eigen::VectorXd>& points, Rng& rng, int max_iter, double tol) {
  const size_t n = points.size();
  if (n < 2) throw ArgumentError("kmeans needs at least 2 samples");
  const Index dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw DimensionError("kmeans: histogram lengths differ");

  KMeansResult r;
  r.assignment.assign(n, 0);
  r.centroids.resize(2, dim);

  // k-means++: first centre uniform, second proportional to squared distance.
  const size_t first = static_cast<size_t>(rng.below(n));
  std::vector<double> d2(n);
  double total = 0;
  for (size_t i = 0; i < n; ++i) total += d2[i] = (points[i] - points[first]).squaredNorm();
  if (total == 0) {
    r.degenerate = true;
    r.centroids.row(0) = points[first].transpose();
    r.centroids.row(1) = points[first].transpose();
    return r;
  }
  double u = rng.uniform() * total;
  size_t second = n - 1;
  for (size_t i = 0; i < n; ++i) {
    if (d2[i] > 0 && u < d2[i]) {
      second = i;
      break;
    }
    u -= d2[i];
  }
  if (d2[second] == 0)  // rounding at the tail
    for (size_t i = n; i-- > 0;)
      if (d2[i] > 0) {
        second = i;
        break;
      }
  r.centroids.row(0) = points[first].transpose();
  r.centroids.row(1) = points[second].transpose();

  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    for (size_t i = 0; i < n; ++i) {
      const double a = (points[i].transpose() - r.centroids.row(0)).squaredNorm();
      const double b = (points[i].transpose() - r.centroids.row(1)).squaredNorm();
      r.assignment[i] = b < a ? 1 : 0;
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(2, dim);
    Index counts[2] = {0, 0};
    for (size_t i = 0; i < n; ++i) {
      next.row(r.assignment[i]) += points[i].transpose();
      ++counts[r.assignment[i]];
    }
    for (int c = 0; c < 2; ++c) {
      if (counts[c] == 0) {
        next.row(c) = r.centroids.row(c);  // empty cluster keeps its centre
      } else {
        next.row(c) /= static_cast<double>(counts[c]);
      }
    }
    const double moved = (next - r.centroids).rowwise().norm().maxCoeff();
    r.centroids = next;
    if (moved <= tol) break;
  }
  r.iterations = std::min(r.iterations, max_iter);
  return r;
}

std::vector<Index> SplitPlan::members(int c) const {
  std::vector<Index> out;
  for (size_t i = 0; i < cluster.size(); ++i)
    if (cluster[i] == c) out.push_back(static_cast<Index>(i));
  return out;
}

SplitPlan kmeans_split(const std::vector<HistogramVector>& histograms, bool balanced, Rng& rng) {
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(histograms.size());
  for (const auto& h : histograms) pts.push_back(h.values);
  const KMeansResult km = kmeans2(pts, rng);
  SplitPlan plan;
  const size_t n = pts.size();
  plan.cluster.assign(n, 1);
  if (km.degenerate) {
    plan.degenerate = true;
    plan.warning = "all histograms are identical; every sample is in cluster 1";
  } else if (balanced) {
    std::vector<double> ratio(n);
    for (size_t i = 0; i < n; ++i) {
      const double a = (pts[i].transpose() - km.centroids.row(0)).norm();
      const double b = (pts[i].transpose() - km.centroids.row(1)).norm();
      ratio[i] = b == 0 ? (a == 0 ? 1.0 : INFINITY) : a / b;
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) { return ratio[x] > ratio[y]; });
    for (size_t r = 0; r < n / 2; ++r) plan.cluster[order[r]] = 2;
  } else {
    for (size_t i = 0; i < n; ++i) plan.cluster[i] = km.assignment[i] + 1;
  }
  plan.domain_a = plan.members(1);
  plan.domain_b = plan.members(2);
  return plan;
}

Index mixing_count(Index size, double percent) {
  if (!(percent >= 0 && percent <= 100)) throw ArgumentError("mixing percent must be in [0, 100]");
  // The epsilon keeps exact products such as 10% of 300 from flooring to 29.
  return static_cast<Index>(std::floor(percent * static_cast<double>(size) / 100.0 + 1e-9));
}

SplitPlan apply_mixing(const SplitPlan& plan, double percent, Rng& rng) {
  SplitPlan out = plan;
  out.mixing_percent = percent;
  auto c1 = plan.members(1), c2 = plan.members(2);
  const Index add_a = mixing_count(static_cast<Index>(c2.size()), percent);
  const Index add_b = mixing_count(static_cast<Index>(c1.size()), percent);
  rng.shuffle(c2);
  rng.shuffle(c1);
  std::vector<Index> extra_a(c2.begin(), c2.begin() + add_a), extra_b(c1.begin(), c1.begin() + add_b);
  std::sort(extra_a.begin(), extra_a.end());
  std::sort(extra_b.begin(), extra_b.end());
  out.domain_a.insert(out.domain_a.end(), extra_a.begin(), extra_a.end());
  out.domain_b.insert(out.domain_b.end(), extra_b.begin(), extra_b.end());
  return out;
}

}  // namespace srunit
