#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <limits>

#include "semantify/error.hpp"
#include "semantify/image.hpp"
#include "semantify/plot.hpp"
#include "semantify/procedural.hpp"
#include "semantify/rasterizer.hpp"
#include "support/support.hpp"

using namespace semantify;

namespace {

struct Box {
  int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
  bool empty() const { return x1 < 0; }
};

Box foreground(const Image& img, Rgb background) {
  Box b;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y) != background) {
        b.x0 = std::min(b.x0, x);
        b.x1 = std::max(b.x1, x);
        b.y0 = std::min(b.y0, y);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

}  // namespace

TEST_CASE("png round trip") {
  Image img(5, 3, {10, 20, 30});
  img.set(4, 2, {255, 0, 1});
  const auto bytes = encode_png(img);
  CHECK(decode_png(bytes) == img);
  CHECK(encode_png(img) == bytes);
  testing::TempDir dir;
  write_png(dir / "a.png", img);
  CHECK(read_png(dir / "a.png") == img);
}

TEST_CASE("png errors") {
  const std::vector<std::uint8_t> junk{0x89, 'P', 'N', 'G', 1, 2, 3};
  CHECK_THROWS_AS(decode_png(junk), DataError);
  CHECK_THROWS_AS(encode_png(Image{}), ArgumentError);
  testing::TempDir dir;
  CHECK_THROWS(read_png(dir / "missing.png"));
}

TEST_CASE("frontal render of the toy body is horizontally centered") {
  const auto model = make_toy_body_model();
  const Mesh mesh = synthesize(model, CoefficientVector::Zero());
  RenderRequest req;
  req.image_size = 256;
  const Image img = SoftwareRasterizer().render(mesh, req);
  REQUIRE(img.width == 256);
  const Box box = foreground(img, req.background);
  REQUIRE_FALSE(box.empty());
  const double center = 0.5 * (box.x0 + box.x1 + 1);
  CHECK(std::abs(center - 128.0) <= 0.05 * 256);
  // The body is taller than wide and fully inside the frame.
  CHECK(box.y1 - box.y0 > box.x1 - box.x0);
  CHECK(box.y0 > 0);
  CHECK(box.y1 < 255);
}

TEST_CASE("rendering is deterministic") {
  const auto model = make_toy_body_model(24, 16);
  Rng rng(4);
  const Mesh mesh = synthesize(model, sample_coefficients(model, rng));
  RenderRequest req;
  req.image_size = 96;
  req.material = Material::textured(2);
  req.camera.azimuth_deg = 45.0;
  const SoftwareRasterizer r;
  CHECK(encode_png(r.render(mesh, req)) == encode_png(r.render(mesh, req)));
}

TEST_CASE("degenerate meshes are rejected") {
  const auto model = make_toy_body_model(24, 16);
  Mesh mesh = synthesize(model, CoefficientVector::Zero());
  Mesh collapsed = mesh;
  collapsed.vertices.setZero();
  CHECK_THROWS_AS(validate_renderable(collapsed), DataError);
  CHECK_THROWS_AS(SoftwareRasterizer().render(collapsed, {}), DataError);
  mesh.vertices(3, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_renderable(mesh), DataError);
}

TEST_CASE("vertex colors must match the vertex count") {
  const auto model = make_toy_body_model(24, 16);
  const Mesh mesh = synthesize(model, CoefficientVector::Zero());
  std::vector<Rgb> colors(3, Rgb{1, 2, 3});
  RenderRequest req;
  req.image_size = 64;
  req.vertex_colors = colors;
  CHECK_THROWS_AS(SoftwareRasterizer().render(mesh, req), DimensionError);
}

TEST_CASE("projection puts the bounding-box center at the image center") {
  Vertices v(2, 3);
  v << -1, -1, 0, 1, 1, 0;
  const auto p = project_vertices(v, CameraPose{}, 200);
  // Symmetric corners land symmetric about the center column.
  CHECK((p(0, 0) + p(1, 0)) / 2.0 == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("color maps") {
  CHECK(diverging_color(0.0) == Rgb{247, 247, 247});
  const Rgb neg = diverging_color(-1.0);
  const Rgb pos = diverging_color(1.0);
  CHECK(neg[2] > neg[0]);
  CHECK(pos[0] > pos[2]);
  CHECK(heat_color(0.0) != heat_color(1.0));
}

TEST_CASE("plots have the requested geometry") {
  Eigen::MatrixXd corr(3, 3);
  corr << 1, 0.5, -0.5, 0.5, 1, 0, -0.5, 0, 1;
  const Image heat = correlation_heatmap(corr, 8);
  CHECK(heat.width >= 24);
  CHECK(heat.height >= 24);

  TrainingLog log;
  for (int e = 0; e < 5; ++e) log.epochs.push_back({e, 1.0 / (e + 1), 1.5 / (e + 1)});
  const Image curve = training_curve(log, 320, 200);
  CHECK(curve.width == 320);
  CHECK(curve.height == 200);
}
