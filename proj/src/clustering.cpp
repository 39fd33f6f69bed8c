#include "semantify/clustering.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "semantify/error.hpp"
#include "semantify/rng.hpp"

namespace semantify {

namespace {

KMeansResult lloyd(const Eigen::MatrixXd& x, int k, Rng& rng, int max_iter) {
  const auto n = x.rows();
  KMeansResult r;
  r.centroids.resize(k, x.cols());

  // k-means++ seeding.
  r.centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (x.rowwise() - r.centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    r.centroids.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - r.centroids.row(c)).rowwise().squaredNorm());
  }

  r.labels.assign(static_cast<std::size_t>(n), -1);
  Eigen::VectorXd best(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - r.centroids.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          arg = c;
        }
      }
      best[i] = bd;
      if (r.labels[static_cast<std::size_t>(i)] != arg) {
        r.labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.labels[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    r.has_empty_cluster = false;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Re-seed an empty cluster at the worst-fit point.
      Eigen::Index far = 0;
      const double far_d = best.maxCoeff(&far);
      if (far_d <= 0.0) {
        r.has_empty_cluster = true;
        continue;
      }
      r.centroids.row(c) = x.row(far);
      best[far] = 0.0;
      changed = true;
    }
    if (!changed) break;
  }

  r.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    r.inertia += (x.row(i) - r.centroids.row(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int n_init, int max_iter) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  if (points.rows() < k) throw ArgumentError(fmt::format("k-means with k={} needs at least k points", k));
  Rng rng(seed);
  KMeansResult best;
  bool have = false;
  for (int run = 0; run < std::max(1, n_init); ++run) {
    KMeansResult r = lloyd(points, k, rng, max_iter);
    const bool better = !have || (best.has_empty_cluster && !r.has_empty_cluster) ||
                        (best.has_empty_cluster == r.has_empty_cluster && r.inertia < best.inertia);
    if (better) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

double silhouette_score(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k) {
  const auto n = points.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw DimensionError("labels/points size mismatch");
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  for (const int l : labels) {
    if (l < 0 || l >= k) throw ArgumentError("label out of range");
    ++sizes[static_cast<std::size_t>(l)];
  }
  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (points.row(i) - points.row(j)).norm();
    }
    const int own = labels[static_cast<std::size_t>(i)];
    if (sizes[static_cast<std::size_t>(own)] <= 1) continue;
    const double a = sums[static_cast<std::size_t>(own)] / static_cast<double>(sizes[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own && sizes[static_cast<std::size_t>(c)] > 0)
        b = std::min(b, sums[static_cast<std::size_t>(c)] / static_cast<double>(sizes[static_cast<std::size_t>(c)]));
    const double m = std::max(a, b);
    if (std::isfinite(b) && m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

ClusterAssignment cluster_images(const Eigen::MatrixXd& embeddings, int k_min, int k_max, std::uint64_t seed) {
  if (k_min < 2 || k_max < k_min) throw ArgumentError(fmt::format("invalid k range [{}, {}]", k_min, k_max));
  const auto n = embeddings.rows();
  if (n < 2 * k_min)
    throw ArgumentError(fmt::format("too few samples for clustering: {} < {}", n, 2 * k_min));
  const Eigen::RowVectorXd spread = embeddings.colwise().maxCoeff() - embeddings.colwise().minCoeff();
  if (!(spread.maxCoeff() > 0.0))
    throw NumericError("all embeddings are identical; silhouette is undefined");

  ClusterAssignment best;
  bool have = false;
  for (int k = k_min; k <= std::min<Eigen::Index>(k_max, n - 1); ++k) {
    KMeansResult km = kmeans(embeddings, k, seed + static_cast<std::uint64_t>(k));
    if (km.has_empty_cluster) continue;
    const double s = silhouette_score(embeddings, km.labels, k);
    best.candidates.emplace_back(k, s);
    if (!have || s > best.silhouette) {
      best.k = k;
      best.labels = std::move(km.labels);
      best.centroids = std::move(km.centroids);
      best.silhouette = s;
      have = true;
    }
  }
  if (!have) throw NumericError("no K in range produced non-empty clusters");
  return best;
}

}  // namespace semantify
