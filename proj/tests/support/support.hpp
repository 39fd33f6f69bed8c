#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "semantify/mapper.hpp"
#include "semantify/mlp.hpp"
#include "semantify/morphable_model.hpp"
#include "semantify/scorer.hpp"

namespace semantify::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("semantify_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Model with `n` vertices on a line (x = index) and a ring of faces.
/// Coefficient i moves vertex v along z by basis(i, v).
inline MorphableModel line_model(const std::string& id, const Eigen::MatrixXd& z_basis /* n x 10 */) {
  const auto n = z_basis.rows();
  Vertices tmpl(n, 3);
  for (Eigen::Index v = 0; v < n; ++v) tmpl.row(v) << static_cast<double>(v), static_cast<double>(v % 7), 0.0;
  Faces faces(n - 2, 3);
  for (Eigen::Index f = 0; f + 2 < n; ++f)
    faces.row(f) << static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(f + 1), static_cast<std::uint32_t>(f + 2);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * n, kNumCoefficients);
  for (Eigen::Index v = 0; v < n; ++v) basis.row(3 * v + 2) = z_basis.row(v);
  return MorphableModel(id, ModelFamily::body, std::move(tmpl), std::move(faces), std::move(basis),
                        CoefficientVector::Ones());
}

/// Mapper whose network is a single linear layer xi = W omega + b.
inline MapperArtifact linear_mapper(const std::string& model_id, const Eigen::MatrixXd& w /* 10 x d */,
                                    const CoefficientVector& b = CoefficientVector::Zero(), double lo = -1.0,
                                    double hi = 1.0) {
  MapperArtifact art;
  art.mapper_id = "linear";
  art.model_id = model_id;
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    art.descriptors.push_back(Descriptor::from_text("word " + std::to_string(j)));
    art.score_stats.push_back({lo, hi, 0.5 * (lo + hi)});
  }
  art.net = Mlp({DenseLayer{w, b}});
  return art;
}

}  // namespace semantify::testing
