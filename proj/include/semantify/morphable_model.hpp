#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "semantify/rng.hpp"

namespace semantify {

/// Number of principal components every model is restricted to.
inline constexpr int kNumCoefficients = 10;

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;
using CoefficientVector = Eigen::Matrix<double, kNumCoefficients, 1>;

enum class ModelFamily { body, face_shape, face_expression, animal };

std::string_view to_string(ModelFamily family);
ModelFamily parse_model_family(std::string_view text);

/// Sampling clamp k (in standard deviations) for a model family.
double sampling_clamp(ModelFamily family);

/// Articulation and global translation held fixed for every synthesized
/// mesh. Stored for provenance; applied as the identity transform.
struct NeutralPose {
  std::vector<double> pose;
  std::array<double, 3> translation{0.0, 0.0, 0.0};
};

/// A linear-blendshape parametric model truncated to the first
/// kNumCoefficients components. Immutable after construction.
class MorphableModel {
 public:
  /// Validates shapes and truncates `basis` to kNumCoefficients columns.
  /// Throws DimensionError / DataError on inconsistent input.
  MorphableModel(std::string model_id, ModelFamily family, Vertices template_vertices,
                 Faces faces, Eigen::MatrixXd basis, Eigen::VectorXd sigma,
                 NeutralPose neutral_pose = {});

  const std::string& model_id() const { return model_id_; }
  ModelFamily family() const { return family_; }
  const Vertices& template_vertices() const { return template_; }
  const Faces& faces() const { return faces_; }
  /// 3N x 10; row 3v+c holds coordinate c of vertex v.
  const Eigen::Matrix<double, Eigen::Dynamic, kNumCoefficients>& basis() const { return basis_; }
  const CoefficientVector& sigma() const { return sigma_; }
  const NeutralPose& neutral_pose() const { return neutral_pose_; }
  Eigen::Index vertex_count() const { return template_.rows(); }
  Eigen::Index face_count() const { return faces_.rows(); }

 private:
  std::string model_id_;
  ModelFamily family_;
  Vertices template_;
  Faces faces_;
  Eigen::Matrix<double, Eigen::Dynamic, kNumCoefficients> basis_;
  CoefficientVector sigma_;
  NeutralPose neutral_pose_;
};

struct Mesh {
  Vertices vertices;
  Faces faces;
};

/// template + reshape(basis * coeffs). Throws ArgumentError on non-finite
/// coefficients.
Mesh synthesize(const MorphableModel& model, const CoefficientVector& coeffs);

enum class SamplingDistribution { uniform, truncated_normal };

/// Draws one coefficient vector inside the family's k-sigma box.
CoefficientVector sample_coefficients(
    const MorphableModel& model, Rng& rng,
    SamplingDistribution distribution = SamplingDistribution::uniform);

enum class ArchiveDtype { f32, f64 };

/// Loads a model archive: a directory or a .zip holding manifest.json,
/// template.bin, faces.bin, basis.bin and sigma.bin.
MorphableModel load_model(const std::filesystem::path& path);

/// Writes `model` as an archive directory, or as a zip when `path` ends in
/// ".zip".
void save_model(const MorphableModel& model, const std::filesystem::path& path,
                ArchiveDtype dtype = ArchiveDtype::f32);

}  // namespace semantify
