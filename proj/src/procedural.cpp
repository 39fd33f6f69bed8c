#include "semantify/procedural.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace semantify {

namespace {

constexpr std::array<double, 13> kProfileY{0.0, 0.1, 0.45, 0.8, 0.95, 1.1, 1.3,
                                           1.45, 1.5, 1.55, 1.62, 1.72, 1.8};
constexpr std::array<double, 13> kProfileR{0.07, 0.1, 0.12, 0.16, 0.19, 0.15, 0.17,
                                           0.19, 0.06, 0.06, 0.10, 0.09, 0.0};
constexpr double kHeight = 1.8;

double profile_radius(double y) {
  for (std::size_t i = 1; i < kProfileY.size(); ++i) {
    if (y <= kProfileY[i]) {
      const double t = (y - kProfileY[i - 1]) / (kProfileY[i] - kProfileY[i - 1]);
      return kProfileR[i - 1] + t * (kProfileR[i] - kProfileR[i - 1]);
    }
  }
  return kProfileR.back();
}

double bump(double y, double center, double width) {
  const double t = (y - center) / width;
  return std::exp(-t * t);
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

MorphableModel make_toy_body_model(int rings, int segments) {
  const int ring_vertices = rings * segments;
  const int n = ring_vertices + 2;
  Vertices tmpl(n, 3);

  // Interior rings; poles are appended at the end (bottom, top).
  for (int r = 0; r < rings; ++r) {
    const double y = kHeight * (r + 1) / (rings + 1);
    const double radius = profile_radius(y);
    for (int s = 0; s < segments; ++s) {
      const double theta = 2.0 * std::numbers::pi * s / segments;
      tmpl.row(r * segments + s) << 1.2 * radius * std::sin(theta), y,
          0.8 * radius * std::cos(theta);
    }
  }
  tmpl.row(ring_vertices) << 0.0, 0.0, 0.0;
  tmpl.row(ring_vertices + 1) << 0.0, kHeight, 0.0;

  const int n_faces = 2 * segments * (rings - 1) + 2 * segments;
  Faces faces(n_faces, 3);
  int f = 0;
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const auto a = static_cast<std::uint32_t>(r * segments + s);
      const auto b = static_cast<std::uint32_t>(r * segments + (s + 1) % segments);
      const auto c = static_cast<std::uint32_t>((r + 1) * segments + s);
      const auto d = static_cast<std::uint32_t>((r + 1) * segments + (s + 1) % segments);
      faces.row(f++) << a, c, b;
      faces.row(f++) << b, c, d;
    }
  }
  const auto bottom = static_cast<std::uint32_t>(ring_vertices);
  const auto top = static_cast<std::uint32_t>(ring_vertices + 1);
  const auto last = static_cast<std::uint32_t>((rings - 1) * segments);
  for (int s = 0; s < segments; ++s) {
    const auto s0 = static_cast<std::uint32_t>(s);
    const auto s1 = static_cast<std::uint32_t>((s + 1) % segments);
    faces.row(f++) << bottom, s0, s1;
    faces.row(f++) << top, last + s1, last + s0;
  }

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * n, kNumCoefficients);
  const Eigen::Vector3d head_center(0.0, 1.66, 0.0);
  for (int v = 0; v < n; ++v) {
    const double x = tmpl(v, 0), y = tmpl(v, 1), z = tmpl(v, 2);
    const double rxz = std::hypot(x, z);
    const double ux = rxz > 0 ? x / rxz : 0.0;
    const double uz = rxz > 0 ? z / rxz : 0.0;
    auto set = [&](int mode, double dx, double dy, double dz) {
      basis(3 * v + 0, mode) = dx;
      basis(3 * v + 1, mode) = dy;
      basis(3 * v + 2, mode) = dz;
    };
    // 0 stature, 1 girth, 2 belly, 3 shoulders, 4 hips, 5 leg length,
    // 6 head size, 7 chest depth, 8 neck length, 9 upper back.
    set(0, 0.0, 0.04 * (y - 0.9), 0.0);
    set(1, 0.12 * x, 0.0, 0.12 * z);
    set(2, 0.0, 0.0, 0.06 * bump(y, 1.0, 0.1) * std::max(0.0, uz));
    set(3, 0.05 * bump(y, 1.42, 0.06) * ux, 0.0, 0.0);
    set(4, 0.05 * bump(y, 0.9, 0.07) * ux, 0.0, 0.01 * bump(y, 0.9, 0.07) * uz);
    set(5, 0.0, -0.06 * std::max(0.0, 0.8 - y) / 0.8, 0.0);
    const Eigen::Vector3d from_head = Eigen::Vector3d(x, y, z) - head_center;
    const double head_w = smoothstep(1.5, 1.58, y);
    set(6, 0.25 * head_w * from_head.x(), 0.25 * head_w * from_head.y(),
        0.25 * head_w * from_head.z());
    set(7, 0.0, 0.0, 0.05 * bump(y, 1.28, 0.08) * uz);
    set(8, 0.0, 0.04 * smoothstep(1.46, 1.56, y), 0.0);
    set(9, 0.0, 0.0, 0.05 * bump(y, 1.2, 0.12) * std::min(0.0, uz));
  }

  Eigen::VectorXd sigma(kNumCoefficients);
  for (int i = 0; i < kNumCoefficients; ++i) sigma[i] = 1.0 - 0.05 * i;

  return MorphableModel("toy-body", ModelFamily::body, std::move(tmpl), std::move(faces),
                        std::move(basis), std::move(sigma));
}

}  // namespace semantify
