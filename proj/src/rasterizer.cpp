#include "semantify/rasterizer.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <fmt/format.h>

#include "semantify/error.hpp"

namespace semantify {

namespace {

constexpr double kNearPlane = 1e-3;

struct ViewFrame {
  Eigen::Vector3d eye;
  Eigen::Vector3d right;
  Eigen::Vector3d up;
  Eigen::Vector3d forward;
  double focal_px;  // pixels per unit of x/z
  double half;
};

Eigen::Vector3d bbox_center(const Vertices& v) {
  const Eigen::RowVector3d lo = v.colwise().minCoeff();
  const Eigen::RowVector3d hi = v.colwise().maxCoeff();
  return (0.5 * (lo + hi)).transpose();
}

ViewFrame make_frame(const Vertices& vertices, const CameraPose& cam, int image_size) {
  const double deg = std::numbers::pi / 180.0;
  const double az = cam.azimuth_deg * deg;
  const double el = std::clamp(cam.elevation_deg, -89.0, 89.0) * deg;
  const Eigen::Vector3d target = bbox_center(vertices);
  ViewFrame f;
  f.eye = target + cam.distance * Eigen::Vector3d(std::cos(el) * std::sin(az), std::sin(el),
                                                   std::cos(el) * std::cos(az));
  f.forward = (target - f.eye).normalized();
  f.right = f.forward.cross(Eigen::Vector3d::UnitY()).normalized();
  f.up = f.right.cross(f.forward);
  f.half = 0.5 * image_size;
  f.focal_px = f.half / std::tan(0.5 * cam.fov_deg * deg);
  return f;
}

Eigen::Vector3d project(const ViewFrame& f, const Eigen::Vector3d& p) {
  const Eigen::Vector3d d = p - f.eye;
  const double z = f.forward.dot(d);
  const double x = f.right.dot(d);
  const double y = f.up.dot(d);
  return {f.half + f.focal_px * x / z, f.half - f.focal_px * y / z, z};
}

constexpr std::array<Rgb, 5> kSkinPalette{{
    {224, 172, 105}, {198, 134, 66}, {241, 194, 125}, {255, 219, 172}, {141, 85, 36}}};

Rgb material_color(const Material& m, Eigen::Index face) {
  if (m.kind == Material::Kind::flat_gray) return {180, 180, 180};
  const auto pool = static_cast<std::size_t>(std::abs(m.pool_id)) % kSkinPalette.size();
  Rgb base = kSkinPalette[pool];
  // Fine-grained per-face albedo variation stands in for a surface texture.
  const auto h = static_cast<std::uint32_t>(face) * 2654435761u;
  const double mod = 0.92 + 0.08 * static_cast<double>((h >> 13) & 0xff) / 255.0;
  for (auto& c : base) c = static_cast<std::uint8_t>(std::lround(c * mod));
  return base;
}

}  // namespace

void validate_renderable(const Mesh& mesh) {
  if (mesh.vertices.rows() == 0) throw DataError("degenerate mesh: no vertices");
  if (!mesh.vertices.allFinite()) throw DataError("degenerate mesh: non-finite vertex coordinates");
  const Eigen::RowVector3d extent =
      mesh.vertices.colwise().maxCoeff() - mesh.vertices.colwise().minCoeff();
  if (!(extent.maxCoeff() > 0.0)) throw DataError("degenerate mesh: all vertices coincide");
}

Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> project_vertices(
    const Vertices& vertices, const CameraPose& camera, int image_size) {
  const ViewFrame frame = make_frame(vertices, camera, image_size);
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> out(vertices.rows(), 3);
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    out.row(i) = project(frame, vertices.row(i).transpose()).transpose();
  return out;
}

Image SoftwareRasterizer::render(const Mesh& mesh, const RenderRequest& req) const {
  validate_renderable(mesh);
  if (req.image_size < 1) throw ArgumentError("image_size must be positive");
  if (!req.vertex_colors.empty() &&
      req.vertex_colors.size() != static_cast<std::size_t>(mesh.vertices.rows()))
    throw DimensionError("vertex_colors size does not match vertex count");

  const int size = req.image_size;
  const ViewFrame frame = make_frame(mesh.vertices, req.camera, size);
  const auto screen = project_vertices(mesh.vertices, req.camera, size);

  Image image(size, size, req.background);
  std::vector<double> depth(static_cast<std::size_t>(size) * size,
                            std::numeric_limits<double>::infinity());
  const Eigen::Vector3d to_camera = -frame.forward;

  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    const auto ia = mesh.faces(f, 0), ib = mesh.faces(f, 1), ic = mesh.faces(f, 2);
    const Eigen::Vector3d a = screen.row(ia).transpose();
    const Eigen::Vector3d b = screen.row(ib).transpose();
    const Eigen::Vector3d c = screen.row(ic).transpose();
    if (a.z() <= kNearPlane || b.z() <= kNearPlane || c.z() <= kNearPlane) continue;

    const double area = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (std::abs(area) < 1e-12) continue;

    const Eigen::Vector3d pa = mesh.vertices.row(ia).transpose();
    const Eigen::Vector3d pb = mesh.vertices.row(ib).transpose();
    const Eigen::Vector3d pc = mesh.vertices.row(ic).transpose();
    Eigen::Vector3d normal = (pb - pa).cross(pc - pa);
    const double nn = normal.norm();
    const double lambert = nn > 0.0 ? std::abs(normal.dot(to_camera)) / nn : 0.0;

    Rgb color;
    double shade;
    if (!req.vertex_colors.empty()) {
      for (int ch = 0; ch < 3; ++ch)
        color[ch] = static_cast<std::uint8_t>(
            (req.vertex_colors[ia][ch] + req.vertex_colors[ib][ch] + req.vertex_colors[ic][ch] + 1) / 3);
      shade = 0.55 + 0.45 * lambert;
    } else {
      color = material_color(req.material, f);
      shade = 0.25 + 0.75 * lambert;
    }
    Rgb shaded;
    for (int ch = 0; ch < 3; ++ch)
      shaded[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(color[ch] * shade), 0L, 255L));

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}))));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}))));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));
    const double inv_area = 1.0 / area;

    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = ((b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px)) * inv_area;
        const double w1 = ((c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px)) * inv_area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = 1.0 / (w0 / a.z() + w1 / b.z() + w2 / c.z());
        auto& slot = depth[static_cast<std::size_t>(y) * size + x];
        if (z < slot) {
          slot = z;
          image.set(x, y, shaded);
        }
      }
    }
  }
  return image;
}

}  // namespace semantify
