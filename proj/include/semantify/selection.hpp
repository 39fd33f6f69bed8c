#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "semantify/clustering.hpp"
#include "semantify/scorer.hpp"

namespace semantify {

/// Explicit synonym / antonym pairs. Pairs are unordered.
class Lexicon {
 public:
  enum class Relation { none, synonym, antonym };

  void add_synonyms(const std::string& a, const std::string& b);
  void add_antonyms(const std::string& a, const std::string& b);
  Relation relation(const std::string& a, const std::string& b) const;

  /// Throws DataError when a pair names an id outside `known_ids`.
  void validate(const std::vector<std::string>& known_ids) const;
  bool empty() const { return synonyms_.empty() && antonyms_.empty(); }

  /// {"synonyms": [[a, b], ...], "antonyms": [[a, b], ...]}. Words are
  /// normalized to descriptor ids.
  static Lexicon load(const std::filesystem::path& path);

 private:
  using Pair = std::pair<std::string, std::string>;
  static Pair ordered(const std::string& a, const std::string& b);
  std::set<Pair> synonyms_;
  std::set<Pair> antonyms_;
};

struct DescriptorClusters {
  std::vector<int> cluster_of;         // per descriptor
  Eigen::MatrixXd normalized_votes;    // K x descriptors
};

/// Each image votes for its `top` most similar descriptors in its own
/// cluster; votes are divided by the cluster size and every descriptor goes to
/// its highest-vote cluster (ties: lower index).
DescriptorClusters assign_descriptors_to_clusters(const Eigen::MatrixXd& image_embeddings,
                                                  const Eigen::MatrixXd& text_embeddings,
                                                  const ClusterAssignment& assignment, int top = 5);

struct CorrelationMatrix {
  std::vector<std::string> ids;           // descriptors with non-zero variance
  Eigen::MatrixXd values;                 // Pearson, symmetric, unit diagonal
  std::vector<std::string> zero_variance; // excluded descriptors
};

/// Pearson correlation between descriptor score columns. Zero-variance
/// columns are excluded and reported. Throws ArgumentError for < 2 samples.
CorrelationMatrix correlation_matrix(const ScoreTable& table);

/// Median of |corr| over all unordered pairs; 1 when there are no pairs.
double median_abs_correlation(const CorrelationMatrix& corr);

enum class FilterReason { correlated_with, synonym_of, antonym_of, below_cut, zero_variance };
std::string_view to_string(FilterReason reason);

struct FilteredDescriptor {
  std::string id;
  FilterReason reason;
  std::string other;  // the kept descriptor that caused the filter, if any
};

struct DescriptorInfo {
  std::string id;
  double variance = 0.0;
  int home_cluster = 0;
};

struct SelectionResult {
  std::vector<Descriptor> chosen;  // presets first, then variance-descending
  std::size_t d = 0;
  std::vector<DescriptorInfo> info;  // every descriptor in table order
  std::vector<FilteredDescriptor> filtered;
  double median_threshold = 1.0;
  /// Equals median_threshold unless filtered descriptors were re-admitted to
  /// reach target_d, in which case it is the largest |corr| among chosen pairs.
  double applied_threshold = 1.0;
  std::size_t preset_count = 0;
  int k = 0;
  double silhouette = 0.0;

  std::vector<std::string> chosen_ids() const;
};

struct SelectionOptions {
  std::vector<std::string> preset;
  std::optional<std::size_t> target_d;
};

SelectionResult select_descriptors(const ScoreTable& table, const ClusterAssignment& assignment,
                                   const DescriptorClusters& desc_clusters, const Lexicon& lexicon,
                                   const SelectionOptions& options = {});

/// Clustering, voting and selection in one call.
SelectionResult run_selection(const ScoreTable& table, const Eigen::MatrixXd& image_embeddings,
                              const Eigen::MatrixXd& text_embeddings, const Lexicon& lexicon,
                              const SelectionOptions& options = {}, int k_min = 2, int k_max = 10,
                              std::uint64_t seed = 0);

void write_selection(const SelectionResult& result, const std::filesystem::path& path);
SelectionResult read_selection(const std::filesystem::path& path);

}  // namespace semantify
