#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "semantify/dataset.hpp"
#include "semantify/evaluation.hpp"
#include "semantify/mapper.hpp"
#include "semantify/scorer.hpp"
#include "semantify/selection.hpp"
#include "semantify/synthetic_backend.hpp"

// Stage runners shared by the command line tool and the end-to-end tests.
// Each runner writes its outputs plus run.json into `out`.
namespace semantify {

inline constexpr const char* kVersion = "0.1.0";

/// run.json: command, version, seed, parameters and the sorted list of files
/// written under the output directory. No timestamps, so reruns are
/// byte-identical.
void write_run_record(const std::filesystem::path& out, const std::string& command, std::uint64_t seed,
                      const nlohmann::json& parameters);

struct BuildDatasetArgs {
  std::filesystem::path model;
  std::size_t n = 3000;
  std::optional<int> views;  // family default when unset
  int image_size = 512;
  int texture_pool_size = 1;
  std::uint64_t seed = 0;
  SamplingDistribution distribution = SamplingDistribution::uniform;
  std::filesystem::path out;
};
DatasetManifest run_build_dataset(const BuildDatasetArgs& args);

struct ScoreArgs {
  std::filesystem::path dataset;
  std::filesystem::path descriptors;
  std::string backend = "synthetic";  // synthetic | external
  /// Synthetic backend: explicit gain, else an existing config, else a
  /// random gain drawn from `seed`.
  std::optional<SyntheticGain> gain;
  std::optional<std::filesystem::path> synthetic_config;
  double gain_scale = 0.02;
  double gain_bias = 0.2;
  std::string endpoint;  // external backend
  ViewAggregation view_agg = ViewAggregation::mean;
  std::string prompt_template;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
ScoredDataset run_score(const ScoreArgs& args);

struct SelectArgs {
  std::filesystem::path scores;  // scores.csv
  std::optional<std::filesystem::path> lexicon;
  /// Directory holding embeddings.bin; defaults to the scores directory.
  std::optional<std::filesystem::path> embeddings;
  std::vector<std::string> preset;
  std::optional<std::size_t> target_d;
  int k_min = 2;
  int k_max = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
SelectionResult run_select(const SelectArgs& args);

struct TrainArgs {
  std::filesystem::path scores;     // scores.csv
  std::filesystem::path selection;  // selection.json
  std::filesystem::path dataset;    // coefficients and model id
  MapperConfig config;
  std::string mapper_id = "mapper";
  std::filesystem::path out;
};
MapperArtifact run_train(const TrainArgs& args);

struct CoverageArgs {
  std::filesystem::path mapper;
  std::filesystem::path model;
  double tau = 0.3;
  bool render = true;
  int image_size = 384;
  std::filesystem::path out;
};
CoverageReport run_coverage(const CoverageArgs& args);

struct FitTargetArgs {
  std::filesystem::path mapper;
  std::filesystem::path model;
  std::optional<CoefficientVector> xi;
  /// Reachable target: predict(mapper, omega).
  std::optional<Eigen::VectorXd> omega;
  FitOptions options;
  std::filesystem::path out;
};
FitResult run_fit_target(const FitTargetArgs& args);

struct FitImageArgs {
  std::filesystem::path mapper;
  std::filesystem::path image;
  std::string backend = "synthetic";
  std::optional<std::filesystem::path> synthetic_config;
  std::vector<std::filesystem::path> proxy_datasets;
  std::string endpoint;
  std::optional<std::filesystem::path> model;  // renders the prediction when set
  std::filesystem::path out;
};
ZeroShotResult run_fit_image(const FitImageArgs& args);

}  // namespace semantify
