#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "semantify/image.hpp"
#include "semantify/mapper.hpp"
#include "semantify/morphable_model.hpp"
#include "semantify/scorer.hpp"

namespace semantify {

/// Per-vertex size of the deformation caused by moving one descriptor from its
/// training min to its training max, all others held at their training mean.
struct EffectField {
  std::string descriptor_id;
  Eigen::VectorXd delta;   // normalized to [0, 1]
  double delta_max = 0.0;  // model units
  bool zero_effect = false;
};

EffectField effect_field(const MapperArtifact& artifact, const MorphableModel& model,
                         const std::string& descriptor_id);

struct DescriptorCoverage {
  std::string id;
  std::vector<std::size_t> covered;  // sorted vertex indices with delta > tau
  double delta_max = 0.0;
  bool zero_effect = false;
};

struct CoverageReport {
  double tau = 0.3;
  std::size_t vertex_count = 0;
  std::vector<DescriptorCoverage> per_descriptor;
  Eigen::MatrixXd iou;  // pairwise, symmetric
  double coverage_pct = 0.0;
  /// Mean IoU over all unordered pairs, in percent.
  double overlap_pct = 0.0;
};

/// Throws ArgumentError unless 0 < tau < 1.
CoverageReport coverage_report(const MapperArtifact& artifact, const MorphableModel& model, double tau = 0.3);
CoverageReport coverage_from_fields(const std::vector<EffectField>& fields, std::size_t vertex_count, double tau);

struct FitOptions {
  double lr = 1e-3;
  int max_steps = 5000;
  double tol = 1e-3;
  /// Grows the step after an accepted update and halves it after a rejected
  /// one. The plain variant takes fixed steps of size lr.
  bool adaptive = true;
  bool finite_differences = false;
};

struct FitResult {
  Eigen::VectorXd omega_star;
  CoefficientVector xi = CoefficientVector::Zero();
  double error = 0.0;  // coefficient-space L2
  int steps = 0;
  std::vector<double> trajectory;  // error before the first step, then after each step
  bool converged = false;
};

constexpr int kMaxFitSteps = 5000;

/// Gradient descent on the scores through the frozen mapper, starting at the
/// training means. Throws NumericError when the plain variant diverges past
/// ten times the initial error.
FitResult fit_target(const MapperArtifact& artifact, const MorphableModel& model, const CoefficientVector& target,
                     const FitOptions& options = {});

/// Gradient of 0.5 * ||predict(omega) - target||^2 with respect to omega.
Eigen::VectorXd fit_gradient(const MapperArtifact& artifact, const Eigen::VectorXd& omega,
                             const CoefficientVector& target, bool finite_differences = false);

/// Mean over vertices of the squared Euclidean distance.
double vertex_error(const Mesh& pred, const Mesh& gt);

struct ZeroShotResult {
  Eigen::VectorXd omega;
  CoefficientVector xi = CoefficientVector::Zero();
};

ZeroShotResult zero_shot_fit(const Image& image, const ScorerBackend& backend, const MapperArtifact& artifact,
                             const std::string& prompt_template = {});

nlohmann::json to_json(const CoverageReport& report);
nlohmann::json to_json(const FitResult& result);
/// vertex,delta rows for one field.
void write_effect_csv(const EffectField& field, const std::filesystem::path& path);

}  // namespace semantify
