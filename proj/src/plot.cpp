#include "semantify/plot.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "semantify/error.hpp"

namespace semantify {

namespace {

std::uint8_t channel(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  Rgb out;
  for (int c = 0; c < 3; ++c)
    out[static_cast<std::size_t>(c)] = channel(
        ((1.0 - t) * a[static_cast<std::size_t>(c)] + t * b[static_cast<std::size_t>(c)]) / 255.0);
  return out;
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, Rgb color) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx)
        if (x + dx >= 0 && x + dx < img.width && y + dy >= 0 && y + dy < img.height) img.set(x + dx, y + dy, color);
  }
}

}  // namespace

Rgb diverging_color(double value) {
  const double v = std::clamp(value, -1.0, 1.0);
  constexpr Rgb blue{33, 102, 172}, white{247, 247, 247}, red{178, 24, 43};
  return v < 0.0 ? lerp(white, blue, -v) : lerp(white, red, v);
}

Rgb heat_color(double t) {
  const double v = std::clamp(t, 0.0, 1.0);
  constexpr Rgb low{49, 54, 149}, mid{255, 255, 191}, high{165, 0, 38};
  return v < 0.5 ? lerp(low, mid, 2.0 * v) : lerp(mid, high, 2.0 * v - 1.0);
}

Image correlation_heatmap(const Eigen::MatrixXd& corr, int cell) {
  if (cell < 1) throw ArgumentError("cell size must be >= 1");
  const auto n = static_cast<int>(corr.rows());
  Image img(std::max(1, n * cell), std::max(1, static_cast<int>(corr.cols()) * cell), Rgb{255, 255, 255});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < corr.cols(); ++c) {
      const Rgb color = diverging_color(corr(r, c));
      for (int y = 0; y < cell; ++y)
        for (int x = 0; x < cell; ++x) img.set(c * cell + x, r * cell + y, color);
    }
  return img;
}

Image training_curve(const TrainingLog& log, int width, int height) {
  Image img(width, height, Rgb{255, 255, 255});
  const double margin = 40.0;
  const Rgb axis{60, 60, 60};
  draw_line(img, margin, height - margin, width - margin / 2, height - margin, axis);
  draw_line(img, margin, margin / 2, margin, height - margin, axis);
  if (log.epochs.empty()) return img;

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& e : log.epochs) {
    for (const double v : {e.train_loss, e.val_loss.value_or(e.train_loss)}) {
      if (v > 0.0) {
        lo = std::min(lo, std::log10(v));
        hi = std::max(hi, std::log10(v));
      }
    }
  }
  if (!std::isfinite(lo)) return img;
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const auto n = static_cast<double>(log.epochs.size());
  const auto px = [&](std::size_t i) {
    return margin + (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5) * (width - 1.5 * margin);
  };
  const auto py = [&](double v) {
    const double t = (std::log10(std::max(v, 1e-300)) - lo) / (hi - lo);
    return height - margin - t * (height - 1.5 * margin);
  };
  const Rgb train_color{31, 119, 180}, val_color{255, 127, 14};
  for (std::size_t i = 1; i < log.epochs.size(); ++i) {
    const auto& a = log.epochs[i - 1];
    const auto& b = log.epochs[i];
    draw_line(img, px(i - 1), py(a.train_loss), px(i), py(b.train_loss), train_color);
    if (a.val_loss && b.val_loss) draw_line(img, px(i - 1), py(*a.val_loss), px(i), py(*b.val_loss), val_color);
  }
  return img;
}

Image effect_render(const MapperArtifact& artifact, const MorphableModel& model, const EffectField& field,
                    const RendererBackend& renderer, const CameraPose& camera, int image_size) {
  if (field.delta.size() != model.vertex_count()) throw DimensionError("effect field does not match the model");
  const Mesh mesh = synthesize(model, predict(artifact, artifact.mean_scores()));
  std::vector<Rgb> colors(static_cast<std::size_t>(field.delta.size()));
  for (Eigen::Index v = 0; v < field.delta.size(); ++v) colors[static_cast<std::size_t>(v)] = heat_color(field.delta[v]);
  RenderRequest req;
  req.camera = camera;
  req.image_size = image_size;
  req.vertex_colors = colors;
  return renderer.render(mesh, req);
}

}  // namespace semantify
