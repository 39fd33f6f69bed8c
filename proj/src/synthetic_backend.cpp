#include "semantify/synthetic_backend.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/error.hpp"
#include "semantify/rng.hpp"

namespace semantify {

using nlohmann::json;

std::uint64_t CoefficientProxy::key(const Image& image) {
  Bytes header;
  append_u32_le(header, static_cast<std::uint32_t>(image.width));
  append_u32_le(header, static_cast<std::uint32_t>(image.height));
  header.insert(header.end(), image.pixels.begin(), image.pixels.end());
  return fnv1a64(header);
}

void CoefficientProxy::add(const Image& image, const CoefficientVector& xi) {
  const auto k = key(image);
  const auto [it, inserted] = entries_.emplace(k, xi);
  if (!inserted && it->second != xi) ambiguous_.insert(k);
}

void CoefficientProxy::add_manifest(const DatasetManifest& manifest) {
  for (const auto& rec : manifest.records)
    for (const auto& rel : rec.image_paths) add(read_png(manifest.root / rel), rec.xi);
}

const CoefficientVector& CoefficientProxy::lookup(const Image& image) const {
  const auto k = key(image);
  if (ambiguous_.contains(k)) throw DataError("image maps to more than one sample");
  const auto it = entries_.find(k);
  if (it == entries_.end()) throw DataError("unknown sample image: not rendered from a proxied dataset");
  return it->second;
}

std::vector<CoefficientVector> CoefficientProxy::coefficients() const {
  std::vector<CoefficientVector> out;
  out.reserve(entries_.size());
  for (const auto& [k, xi] : entries_) out.push_back(xi);
  return out;
}

namespace {

// Squared norm of the minimum-norm image embedding for a target with
// sum of squares `ss` and squared sum `s2` over n descriptors, a = alpha^2.
double min_norm_sq(double a, double ss, double s2, double n) {
  return ss / (1.0 - a) - a * s2 / ((1.0 - a) * (1.0 - a + n * a));
}

// Worst case over all targets.
double worst_norm(double a, double n, const std::vector<std::pair<double, double>>& moments) {
  double worst = 0.0;
  for (const auto& [ss, s2] : moments) worst = std::max(worst, min_norm_sq(a, ss, s2, n));
  return worst;
}

}  // namespace

SyntheticBackend::SyntheticBackend(std::vector<Descriptor> descriptors, Eigen::MatrixXd gain,
                                   Eigen::VectorXd bias, CoefficientProxy proxy,
                                   std::string prompt_template)
    : descriptors_(std::move(descriptors)),
      gain_(std::move(gain)),
      bias_(std::move(bias)),
      proxy_(std::move(proxy)),
      prompt_template_(std::move(prompt_template)) {
  const auto n = static_cast<Eigen::Index>(descriptors_.size());
  if (n == 0) throw ArgumentError("synthetic backend needs at least one descriptor");
  if (gain_.rows() != n || gain_.cols() != kNumCoefficients)
    throw DimensionError(fmt::format("gain must be {} x {}, got {} x {}", n, kNumCoefficients,
                                     gain_.rows(), gain_.cols()));
  if (bias_.size() != n) throw DimensionError(fmt::format("bias must have {} entries", n));
  if (!gain_.allFinite() || !bias_.allFinite()) throw ArgumentError("gain and bias must be finite");

  std::vector<std::pair<double, double>> moments;
  for (const auto& xi : proxy_.coefficients()) {
    const Eigen::VectorXd s = target_scores(xi);
    moments.emplace_back(s.squaredNorm(), s.sum() * s.sum());
  }
  if (moments.empty()) {
    alpha_ = std::sqrt(0.5);
    return;
  }
  const auto nd = static_cast<double>(n);
  double lo = 1e-9, hi = 1.0 - 1e-9;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (worst_norm(m1, nd, moments) < worst_norm(m2, nd, moments)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  const double a = 0.5 * (lo + hi);
  const double worst = worst_norm(a, nd, moments);
  if (worst > 1.0 + 1e-12)
    throw DataError(fmt::format(
        "synthetic scores are not representable by unit embeddings (needs norm {:.4f} > 1); "
        "reduce the gain or bias",
        std::sqrt(worst)));
  alpha_ = std::sqrt(a);
}

Eigen::VectorXd SyntheticBackend::target_scores(const CoefficientVector& xi) const {
  return (gain_ * xi + bias_).cwiseMax(-1.0).cwiseMin(1.0);
}

Eigen::VectorXd SyntheticBackend::embed_scores(const Eigen::VectorXd& target) const {
  const auto n = static_cast<Eigen::Index>(descriptors_.size());
  const double beta = std::sqrt(1.0 - alpha_ * alpha_);
  const double a = alpha_ * alpha_;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n + 2);
  v[0] = alpha_ * target.sum() / (1.0 - a + static_cast<double>(n) * a);
  v.segment(1, n) = (target.array() - alpha_ * v[0]).matrix() / beta;
  const double rest = 1.0 - v.head(n + 1).squaredNorm();
  if (rest < -1e-9) throw NumericError("target scores exceed the representable range");
  v[n + 1] = std::sqrt(std::max(0.0, rest));
  return v;
}

Embedding SyntheticBackend::embed_text(const std::string& text) const {
  const auto n = static_cast<Eigen::Index>(descriptors_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = descriptors_[static_cast<std::size_t>(i)];
    if (text == d.text || text == d.id ||
        (!prompt_template_.empty() && text == apply_prompt_template(prompt_template_, d))) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n + 2);
      v[0] = alpha_;
      v[1 + i] = std::sqrt(1.0 - alpha_ * alpha_);
      return Embedding::from_unit(std::move(v));
    }
  }
  throw DataError(fmt::format("synthetic backend has no descriptor '{}'", text));
}

Embedding SyntheticBackend::embed_image(const Image& image) const {
  return Embedding::from_unit(embed_scores(target_scores(proxy_.lookup(image))));
}

SyntheticGain random_synthetic_gain(std::size_t n_descriptors, std::uint64_t seed, double scale, double bias) {
  Rng rng(seed);
  SyntheticGain g;
  g.gain.resize(static_cast<Eigen::Index>(n_descriptors), kNumCoefficients);
  for (Eigen::Index r = 0; r < g.gain.rows(); ++r)
    for (Eigen::Index c = 0; c < kNumCoefficients; ++c) g.gain(r, c) = scale * rng.normal();
  g.bias = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_descriptors), bias);
  return g;
}

void save_synthetic_backend_config(const std::filesystem::path& path, const SyntheticBackend& backend,
                                   const std::vector<std::filesystem::path>& datasets) {
  json descs = json::array();
  for (const auto& d : backend.descriptors()) descs.push_back({{"id", d.id}, {"text", d.text}});
  json gain = json::array();
  for (Eigen::Index r = 0; r < backend.gain().rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(backend.gain().cols()));
    for (Eigen::Index c = 0; c < backend.gain().cols(); ++c) row[static_cast<std::size_t>(c)] = backend.gain()(r, c);
    gain.push_back(row);
  }
  std::vector<std::string> dirs;
  // Stored relative to the config file so a copied run tree stays valid.
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& d : datasets)
    dirs.push_back(std::filesystem::relative(std::filesystem::absolute(d), base).generic_string());
  const json j = {{"descriptors", descs},
                  {"gain", gain},
                  {"bias", std::vector<double>(backend.bias().data(), backend.bias().data() + backend.bias().size())},
                  {"prompt_template", backend.prompt_template()},
                  {"datasets", dirs}};
  write_text_file(path, j.dump(1) + "\n");
}

SyntheticBackend load_synthetic_backend(const std::filesystem::path& path,
                                        const std::vector<std::filesystem::path>& extra_datasets) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  std::vector<Descriptor> descriptors;
  for (const auto& d : j.at("descriptors"))
    descriptors.push_back({d.at("text").get<std::string>(), d.at("id").get<std::string>()});
  const auto rows = j.at("gain").get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd gain(static_cast<Eigen::Index>(rows.size()), kNumCoefficients);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != static_cast<std::size_t>(kNumCoefficients)) throw DimensionError("gain row width");
    for (int c = 0; c < kNumCoefficients; ++c) gain(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  const auto b = j.at("bias").get<std::vector<double>>();
  Eigen::VectorXd bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  CoefficientProxy proxy;
  for (const auto& dir : j.value("datasets", std::vector<std::string>{})) {
    std::filesystem::path p(dir);
    if (p.is_relative()) p = path.parent_path() / p;
    proxy.add_manifest(load_manifest(p));
  }
  for (const auto& dir : extra_datasets) proxy.add_manifest(load_manifest(dir));
  return SyntheticBackend(std::move(descriptors), std::move(gain), std::move(bias), std::move(proxy),
                          j.value("prompt_template", std::string{}));
}

}  // namespace semantify
