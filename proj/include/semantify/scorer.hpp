#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semantify/dataset.hpp"
#include "semantify/image.hpp"

namespace semantify {

/// A word descriptor. `text` is trimmed and lowercased; `id` is its slug
/// ([a-z0-9_], spaces and hyphens become underscores).
struct Descriptor {
  std::string text;
  std::string id;

  /// Throws ArgumentError on empty text.
  static Descriptor from_text(std::string_view text);
  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

/// One descriptor per non-empty line. Throws DataError when the list is empty
/// or contains duplicate ids.
std::vector<Descriptor> read_descriptor_list(const std::filesystem::path& path);

/// Unit-norm embedding vector.
class Embedding {
 public:
  Embedding() = default;
  /// Normalizes `v`; throws NumericError for a zero or non-finite vector.
  static Embedding normalized(Eigen::VectorXd v);
  /// Wraps a vector that is already unit-norm (checked to 1e-6).
  static Embedding from_unit(Eigen::VectorXd v);

  const Eigen::VectorXd& vector() const { return v_; }
  Eigen::Index dim() const { return v_.size(); }

 private:
  explicit Embedding(Eigen::VectorXd v) : v_(std::move(v)) {}
  Eigen::VectorXd v_;
};

/// Cosine similarity of two unit embeddings, clamped to [-1, 1].
double score(const Embedding& image_emb, const Embedding& text_emb);

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual Embedding embed_text(const std::string& text) const = 0;
  virtual Embedding embed_image(const Image& image) const = 0;
  virtual bool parallel_safe() const = 0;
  virtual std::string name() const = 0;
};

enum class ViewAggregation { mean, max };
std::string_view to_string(ViewAggregation agg);
ViewAggregation parse_view_aggregation(std::string_view text);

struct DescriptorStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

struct DroppedSample {
  std::string sample_id;
  std::string reason;
};

/// Per-sample descriptor scores. Row order follows the dataset manifest.
struct ScoreTable {
  std::vector<std::string> sample_ids;
  std::vector<Descriptor> descriptors;
  Eigen::MatrixXd scores;  // samples x descriptors
  std::vector<DescriptorStats> stats;
  std::vector<DroppedSample> dropped;
  ViewAggregation view_agg = ViewAggregation::mean;

  std::size_t descriptor_index(std::string_view id) const;
  void recompute_stats();
  /// Column subset in the order given by `ids`.
  ScoreTable restricted(const std::vector<std::string>& ids) const;
  /// Throws DataError if shapes or stats are inconsistent.
  void validate() const;
};

struct ScoringOptions {
  ViewAggregation view_agg = ViewAggregation::mean;
  /// Optional prompt with a "{descriptor}" placeholder; verbatim when empty.
  std::string prompt_template;
};

/// Scores plus the embeddings they came from. Image embeddings are the
/// per-sample mean over views, renormalized.
struct ScoredDataset {
  ScoreTable table;
  Eigen::MatrixXd image_embeddings;  // samples x D
  Eigen::MatrixXd text_embeddings;   // descriptors x D
};

std::string apply_prompt_template(const std::string& prompt_template, const Descriptor& d);

ScoredDataset score_dataset_with_embeddings(const DatasetManifest& manifest,
                                            const std::vector<Descriptor>& descriptors,
                                            const ScorerBackend& backend,
                                            const ScoringOptions& options = {});

ScoreTable score_dataset(const DatasetManifest& manifest, const std::vector<Descriptor>& descriptors,
                         const ScorerBackend& backend, const ScoringOptions& options = {});

/// scores.csv (sample_id, one column per descriptor id) and score_stats.json.
void write_score_table(const ScoreTable& table, const std::filesystem::path& dir);
/// Reads scores.csv; descriptor texts and dropped samples come from a
/// sibling score_stats.json when present.
ScoreTable read_score_table(const std::filesystem::path& scores_csv);

/// embeddings.bin (f32 LE, image rows then text rows) plus embeddings.json.
void write_embeddings(const ScoredDataset& scored, const std::filesystem::path& dir);
struct EmbeddingFile {
  std::vector<std::string> sample_ids;
  std::vector<std::string> descriptor_ids;
  Eigen::MatrixXd image_embeddings;
  Eigen::MatrixXd text_embeddings;
};
EmbeddingFile read_embeddings(const std::filesystem::path& dir);

}  // namespace semantify
