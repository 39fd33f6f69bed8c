#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "semantify/dataset.hpp"
#include "semantify/scorer.hpp"

namespace semantify {

/// Maps rendered images back to the coefficient vector they were rendered
/// from, keyed by a hash of the decoded pixels.
class CoefficientProxy {
 public:
  void add(const Image& image, const CoefficientVector& xi);
  /// Reads every image of every record.
  void add_manifest(const DatasetManifest& manifest);
  /// Throws DataError for unknown or ambiguous images.
  const CoefficientVector& lookup(const Image& image) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<CoefficientVector> coefficients() const;

 private:
  static std::uint64_t key(const Image& image);
  std::unordered_map<std::uint64_t, CoefficientVector> entries_;
  std::set<std::uint64_t> ambiguous_;
};

/// Deterministic test oracle standing in for a vision-language model.
///
/// Scores are linear in the coefficients: for an image of sample s the
/// descriptor scores come out as clip(A * xi_s + b, -1, 1) exactly. Text
/// embedding i is alpha*e0 + beta*e_(1+i); the image embedding is the
/// minimum-norm vector in span(e0..e_n) hitting the target scores, with the
/// remaining norm on a spare axis. That vector must have norm <= 1 for every
/// target seen in the proxy; alpha is chosen at construction to make that
/// hold for all of them, otherwise construction throws.
class SyntheticBackend final : public ScorerBackend {
 public:
  SyntheticBackend(std::vector<Descriptor> descriptors, Eigen::MatrixXd gain, Eigen::VectorXd bias,
                   CoefficientProxy proxy, std::string prompt_template = {});

  Embedding embed_text(const std::string& text) const override;
  Embedding embed_image(const Image& image) const override;
  bool parallel_safe() const override { return true; }
  std::string name() const override { return "synthetic"; }

  /// clip(A * xi + b, -1, 1).
  Eigen::VectorXd target_scores(const CoefficientVector& xi) const;
  Eigen::VectorXd embed_scores(const Eigen::VectorXd& target) const;

  const std::vector<Descriptor>& descriptors() const { return descriptors_; }
  const Eigen::MatrixXd& gain() const { return gain_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  const std::string& prompt_template() const { return prompt_template_; }
  double alpha() const { return alpha_; }

 private:
  std::vector<Descriptor> descriptors_;
  Eigen::MatrixXd gain_;
  Eigen::VectorXd bias_;
  CoefficientProxy proxy_;
  std::string prompt_template_;
  double alpha_ = 0.5;
};

/// Seeded N x 10 gain with entries ~ N(0, scale^2), plus a constant bias.
/// Defaults produce CLIP-like scores around 0.2.
struct SyntheticGain {
  Eigen::MatrixXd gain;
  Eigen::VectorXd bias;
};
SyntheticGain random_synthetic_gain(std::size_t n_descriptors, std::uint64_t seed, double scale = 0.02,
                                    double bias = 0.2);

/// synthetic_backend.json: descriptors, gain, bias, prompt template and the
/// dataset directories that make up the proxy.
void save_synthetic_backend_config(const std::filesystem::path& path, const SyntheticBackend& backend,
                                   const std::vector<std::filesystem::path>& datasets);
/// `extra_datasets` are added to the proxy on top of the configured ones.
SyntheticBackend load_synthetic_backend(const std::filesystem::path& path,
                                        const std::vector<std::filesystem::path>& extra_datasets = {});

}  // namespace semantify
