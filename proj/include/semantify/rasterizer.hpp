#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>

#include "semantify/image.hpp"
#include "semantify/morphable_model.hpp"

namespace semantify {

/// Orbit camera around the mesh bounding-box center. Azimuth rotates about
/// +y (0 looks along -z at the mesh front), elevation tilts towards +y.
struct CameraPose {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double distance = 3.0;
  double fov_deg = 40.0;
};

struct Material {
  enum class Kind { flat_gray, textured };
  Kind kind = Kind::flat_gray;
  int pool_id = 0;

  static Material flat_gray() { return {}; }
  static Material textured(int pool_id) { return {Kind::textured, pool_id}; }
};

struct RenderRequest {
  CameraPose camera;
  int image_size = 512;
  Material material;
  Rgb background{255, 255, 255};
  /// Optional per-vertex colors; overrides the material when set.
  std::span<const Rgb> vertex_colors;
};

/// Renders one mesh to one RGB image.
class RendererBackend {
 public:
  virtual ~RendererBackend() = default;
  virtual Image render(const Mesh& mesh, const RenderRequest& request) const = 0;
  /// Whether render() may be called concurrently from several threads.
  virtual bool parallel_safe() const = 0;
  virtual std::string name() const = 0;
};

/// Throws DataError if the mesh has non-finite vertices or zero extent.
void validate_renderable(const Mesh& mesh);

/// Projects world-space points into pixel coordinates for the camera used by
/// SoftwareRasterizer. Returns (x, y, view_depth) per point.
Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> project_vertices(
    const Vertices& vertices, const CameraPose& camera, int image_size);

/// Flat-shaded z-buffered triangle rasterizer with a camera headlight.
/// Stateless, hence parallel-safe.
class SoftwareRasterizer final : public RendererBackend {
 public:
  Image render(const Mesh& mesh, const RenderRequest& request) const override;
  bool parallel_safe() const override { return true; }
  std::string name() const override { return "software"; }
};

}  // namespace semantify
