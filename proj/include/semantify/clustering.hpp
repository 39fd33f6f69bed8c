#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

namespace semantify {

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x D
  double inertia = 0.0;
  bool has_empty_cluster = false;
};

/// Lloyd's algorithm with k-means++ seeding; the best of `n_init` restarts
/// (lowest inertia) is returned. Rows of `points` are samples.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int n_init = 4,
                    int max_iter = 300);

/// Mean silhouette coefficient with Euclidean distances. Members of
/// singleton clusters contribute 0.
double silhouette_score(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k);

struct ClusterAssignment {
  int k = 0;
  std::vector<int> labels;
  double silhouette = 0.0;
  Eigen::MatrixXd centroids;
  /// (K, silhouette) for every K that produced k non-empty clusters.
  std::vector<std::pair<int, double>> candidates;
};

/// Runs k-means for each K in [k_min, k_max] and keeps the assignment with the
/// highest silhouette (ties go to the smaller K). Throws ArgumentError when
/// there are fewer than 2*k_min samples and NumericError when the points are
/// all identical.
ClusterAssignment cluster_images(const Eigen::MatrixXd& embeddings, int k_min = 2, int k_max = 10,
                                 std::uint64_t seed = 0);

}  // namespace semantify
