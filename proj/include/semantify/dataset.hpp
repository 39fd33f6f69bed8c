#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semantify/image.hpp"
#include "semantify/morphable_model.hpp"
#include "semantify/rasterizer.hpp"

namespace semantify {

struct RenderConfig {
  std::vector<CameraPose> views;
  int image_size = 512;
  Material material = Material::textured(0);
  /// When > 1 and the material is textured, sample i uses pool entry
  /// (material.pool_id + i) % texture_pool_size.
  int texture_pool_size = 1;
  Rgb background{255, 255, 255};

  /// Three views (front, +/-45 deg azimuth) for bodies and animals, one
  /// frontal view for faces.
  static RenderConfig defaults_for(ModelFamily family);
  /// `count` views spread symmetrically around the front, 45 deg apart.
  static std::vector<CameraPose> orbit_views(int count, double distance = 3.0);

  /// Throws ArgumentError when there is no view or image_size < 64.
  void validate() const;
};

struct DatasetRecord {
  std::string sample_id;
  CoefficientVector xi;
  /// Relative to the dataset directory, one per view.
  std::vector<std::string> image_paths;
};

struct DatasetGap {
  std::string sample_id;
  std::string reason;
};

struct DatasetManifest {
  std::string model_id;
  std::size_t n_samples = 0;  // == records.size()
  std::vector<DatasetRecord> records;
  std::vector<DatasetGap> gaps;
  std::uint64_t rng_seed = 0;
  SamplingDistribution distribution = SamplingDistribution::uniform;
  RenderConfig render_config;
  /// Directory the manifest was loaded from; image paths resolve against it.
  std::filesystem::path root;
};

std::string sample_id_for(std::size_t index);

/// One image per configured view. Rejects degenerate meshes.
std::vector<Image> render_views(const Mesh& mesh, const RenderConfig& cfg,
                                const RendererBackend& renderer, int sample_index = 0);

/// Samples `n_samples` coefficient vectors, renders every view, and writes
/// images/, dataset.json and coeffs.csv under `out_dir`. Samples whose render
/// fails are skipped and listed in the manifest's gaps.
DatasetManifest build_dataset(const MorphableModel& model, std::size_t n_samples,
                              const RenderConfig& cfg, const RendererBackend& renderer,
                              const std::filesystem::path& out_dir, std::uint64_t seed,
                              SamplingDistribution distribution = SamplingDistribution::uniform);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir);
DatasetManifest load_manifest(const std::filesystem::path& dir);

/// sample_id,xi_0..xi_9 with full double precision.
std::string coefficients_csv(const DatasetManifest& manifest);

struct CoefficientTable {
  std::vector<std::string> sample_ids;
  std::vector<CoefficientVector> rows;
};
CoefficientTable read_coefficients_csv(const std::filesystem::path& path);

}  // namespace semantify
