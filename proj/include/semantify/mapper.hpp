#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semantify/dataset.hpp"
#include "semantify/mlp.hpp"
#include "semantify/morphable_model.hpp"
#include "semantify/scorer.hpp"

namespace semantify {

struct MapperConfig {
  std::vector<int> hidden{500, 800};
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Mean squared L2 instead of mean L2 norm.
  bool squared_loss = false;
  /// Anneal the learning rate to zero along a half cosine over all steps.
  bool cosine_decay = false;

  void validate() const;
};

struct ScoreStat {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

/// Per-sample L2 coefficient error over the training rows, measured with the
/// stored (float) weights.
struct ResidualStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  ResidualStats residual;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
};

struct MapperArtifact {
  std::string mapper_id;
  std::string model_id;
  std::vector<Descriptor> descriptors;
  std::vector<ScoreStat> score_stats;
  Mlp net;
  MapperConfig config;
  TrainingLog training_log;

  std::size_t d() const { return descriptors.size(); }
  std::vector<std::string> descriptor_ids() const;
  Eigen::VectorXd mean_scores() const;
  /// Throws DataError when widths or stats are inconsistent.
  void validate() const;
};

/// Rows are joined on sample_id; every score row needs a coefficient row.
/// Throws DataError for empty input, missing rows or zero-variance scores and
/// NumericError when the loss becomes non-finite.
MapperArtifact train_mapper(const ScoreTable& scores, const CoefficientTable& coeffs, const MapperConfig& cfg,
                            const std::string& model_id, const std::string& mapper_id = "mapper");

/// Single forward pass. Throws DimensionError on a width mismatch and
/// ArgumentError on non-finite input.
CoefficientVector predict(const MapperArtifact& artifact, const Eigen::VectorXd& omega);
/// Row-wise predictions for a samples x d matrix.
Eigen::MatrixXd predict_batch(const MapperArtifact& artifact, const Eigen::MatrixXd& omega);

struct SliderRange {
  std::string id;
  std::string text;
  double lo = 0.0;
  double hi = 0.0;
  double default_value = 0.0;
};

/// lo/hi are the training min/max, default the training mean. A slider at
/// fraction t maps to lo + t * (hi - lo).
std::vector<SliderRange> slider_ranges(const MapperArtifact& artifact);

/// mapper.json plus weights.bin (per layer: weight rows then bias, f32 LE).
void save_mapper(const MapperArtifact& artifact, const std::filesystem::path& dir);
MapperArtifact load_mapper(const std::filesystem::path& dir);

}  // namespace semantify
