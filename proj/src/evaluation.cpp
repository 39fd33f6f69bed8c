#include "semantify/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "semantify/archive.hpp"
#include "semantify/csv.hpp"
#include "semantify/error.hpp"

namespace semantify {

using nlohmann::json;

EffectField effect_field(const MapperArtifact& artifact, const MorphableModel& model,
                         const std::string& descriptor_id) {
  const auto ids = artifact.descriptor_ids();
  const auto it = std::find(ids.begin(), ids.end(), descriptor_id);
  if (it == ids.end()) throw ArgumentError(fmt::format("descriptor '{}' is not in mapper '{}'", descriptor_id,
                                                       artifact.mapper_id));
  const auto j = static_cast<Eigen::Index>(it - ids.begin());

  Eigen::VectorXd low = artifact.mean_scores();
  Eigen::VectorXd high = low;
  low[j] = artifact.score_stats[static_cast<std::size_t>(j)].min;
  high[j] = artifact.score_stats[static_cast<std::size_t>(j)].max;
  const Vertices v_low = synthesize(model, predict(artifact, low)).vertices;
  const Vertices v_high = synthesize(model, predict(artifact, high)).vertices;

  EffectField f;
  f.descriptor_id = descriptor_id;
  f.delta = (v_low - v_high).rowwise().norm();
  f.delta_max = f.delta.size() > 0 ? f.delta.maxCoeff() : 0.0;
  if (f.delta_max > 0.0) {
    f.delta /= f.delta_max;
  } else {
    f.zero_effect = true;
    f.delta.setZero();
  }
  return f;
}

CoverageReport coverage_from_fields(const std::vector<EffectField>& fields, std::size_t vertex_count, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError(fmt::format("tau must be in (0, 1), got {}", tau));
  CoverageReport r;
  r.tau = tau;
  r.vertex_count = vertex_count;
  std::vector<bool> any(vertex_count, false);
  for (const auto& f : fields) {
    if (static_cast<std::size_t>(f.delta.size()) != vertex_count)
      throw DimensionError(fmt::format("effect field '{}' has the wrong vertex count", f.descriptor_id));
    DescriptorCoverage c{f.descriptor_id, {}, f.delta_max, f.zero_effect};
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (f.delta[static_cast<Eigen::Index>(v)] > tau) {
        c.covered.push_back(v);
        any[v] = true;
      }
    }
    r.per_descriptor.push_back(std::move(c));
  }
  const auto covered = static_cast<double>(std::count(any.begin(), any.end(), true));
  r.coverage_pct = vertex_count > 0 ? 100.0 * covered / static_cast<double>(vertex_count) : 0.0;

  const auto m = static_cast<Eigen::Index>(r.per_descriptor.size());
  r.iou = Eigen::MatrixXd::Zero(m, m);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto& sa = r.per_descriptor[static_cast<std::size_t>(a)].covered;
    r.iou(a, a) = sa.empty() ? 0.0 : 1.0;
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const auto& sb = r.per_descriptor[static_cast<std::size_t>(b)].covered;
      std::vector<std::size_t> inter;
      std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
      const std::size_t uni = sa.size() + sb.size() - inter.size();
      const double iou = uni > 0 ? static_cast<double>(inter.size()) / static_cast<double>(uni) : 0.0;
      r.iou(a, b) = r.iou(b, a) = iou;
      sum += iou;
      ++pairs;
    }
  }
  r.overlap_pct = pairs > 0 ? 100.0 * sum / static_cast<double>(pairs) : 0.0;
  return r;
}

CoverageReport coverage_report(const MapperArtifact& artifact, const MorphableModel& model, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError(fmt::format("tau must be in (0, 1), got {}", tau));
  std::vector<EffectField> fields;
  for (const auto& id : artifact.descriptor_ids()) fields.push_back(effect_field(artifact, model, id));
  return coverage_from_fields(fields, static_cast<std::size_t>(model.vertex_count()), tau);
}

namespace {

double fit_error(const MapperArtifact& artifact, const Eigen::VectorXd& omega, const CoefficientVector& target) {
  return (predict(artifact, omega) - target).norm();
}

}  // namespace

Eigen::VectorXd fit_gradient(const MapperArtifact& artifact, const Eigen::VectorXd& omega,
                             const CoefficientVector& target, bool finite_differences) {
  if (finite_differences) {
    Eigen::VectorXd g(omega.size());
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < omega.size(); ++j) {
      Eigen::VectorXd p = omega;
      Eigen::VectorXd m = omega;
      p[j] += h;
      m[j] -= h;
      const double fp = 0.5 * (predict(artifact, p) - target).squaredNorm();
      const double fm = 0.5 * (predict(artifact, m) - target).squaredNorm();
      g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
  }
  if (omega.size() != static_cast<Eigen::Index>(artifact.d()))
    throw DimensionError(fmt::format("mapper expects {} scores, got {}", artifact.d(), omega.size()));
  Mlp::Cache cache;
  const Eigen::MatrixXd pred = artifact.net.forward(omega.transpose(), cache);
  const Eigen::MatrixXd r = pred - target.transpose();
  return artifact.net.input_gradient(cache, r).row(0).transpose();
}

FitResult fit_target(const MapperArtifact& artifact, const MorphableModel& model, const CoefficientVector& target,
                     const FitOptions& options) {
  if (artifact.model_id != model.model_id())
    throw ArgumentError(fmt::format("mapper '{}' belongs to model '{}', not '{}'", artifact.mapper_id,
                                    artifact.model_id, model.model_id()));
  if (!target.allFinite()) throw ArgumentError("target coefficients must be finite");
  if (!(options.lr > 0.0)) throw ArgumentError("learning rate must be positive");
  if (options.max_steps < 0 || options.max_steps > kMaxFitSteps)
    throw ArgumentError(fmt::format("max_steps must be in [0, {}]", kMaxFitSteps));

  FitResult r;
  r.omega_star = artifact.mean_scores();
  r.error = fit_error(artifact, r.omega_star, target);
  r.trajectory.push_back(r.error);
  const double initial = r.error;
  double step = options.lr;
  while (r.error > options.tol && r.steps < options.max_steps) {
    const Eigen::VectorXd g = fit_gradient(artifact, r.omega_star, target, options.finite_differences);
    ++r.steps;
    const Eigen::VectorXd candidate = r.omega_star - step * g;
    const double err = fit_error(artifact, candidate, target);
    if (options.adaptive) {
      if (err < r.error) {
        r.omega_star = candidate;
        r.error = err;
        step *= 1.2;
      } else {
        step *= 0.5;
        if (step < 1e-300) break;
      }
    } else {
      r.omega_star = candidate;
      r.error = err;
      if (!std::isfinite(err) || err > 10.0 * initial)
        throw NumericError(fmt::format("fit diverged at step {}: error {} exceeds 10x the initial {}", r.steps, err,
                                       initial));
    }
    r.trajectory.push_back(r.error);
  }
  r.xi = predict(artifact, r.omega_star);
  r.converged = r.error <= options.tol;
  return r;
}

double vertex_error(const Mesh& pred, const Mesh& gt) {
  if (pred.vertices.rows() != gt.vertices.rows())
    throw DimensionError(fmt::format("topology mismatch: {} vs {} vertices", pred.vertices.rows(), gt.vertices.rows()));
  if (pred.faces.rows() != gt.faces.rows() || pred.faces != gt.faces)
    throw DimensionError("topology mismatch: faces differ");
  if (pred.vertices.rows() == 0) throw DimensionError("meshes have no vertices");
  return (pred.vertices - gt.vertices).rowwise().squaredNorm().mean();
}

ZeroShotResult zero_shot_fit(const Image& image, const ScorerBackend& backend, const MapperArtifact& artifact,
                             const std::string& prompt_template) {
  const Embedding img = backend.embed_image(image);
  ZeroShotResult r;
  r.omega.resize(static_cast<Eigen::Index>(artifact.d()));
  for (std::size_t j = 0; j < artifact.d(); ++j)
    r.omega[static_cast<Eigen::Index>(j)] =
        score(img, backend.embed_text(apply_prompt_template(prompt_template, artifact.descriptors[j])));
  r.xi = predict(artifact, r.omega);
  return r;
}

json to_json(const CoverageReport& r) {
  json per = json::array();
  for (const auto& c : r.per_descriptor)
    per.push_back({{"id", c.id},
                   {"covered_vertices", c.covered.size()},
                   {"delta_max", c.delta_max},
                   {"zero_effect", c.zero_effect}});
  json iou = json::array();
  for (Eigen::Index a = 0; a < r.iou.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index b = 0; b < r.iou.cols(); ++b) row.push_back(r.iou(a, b));
    iou.push_back(row);
  }
  return {{"tau", r.tau},
          {"vertex_count", r.vertex_count},
          {"per_descriptor", per},
          {"coverage_pct", r.coverage_pct},
          {"overlap_pct", r.overlap_pct},
          {"overlap_aggregate", "mean_pairwise_iou"},
          {"pairwise_iou", iou}};
}

json to_json(const FitResult& r) {
  return {{"omega_star", std::vector<double>(r.omega_star.data(), r.omega_star.data() + r.omega_star.size())},
          {"xi", std::vector<double>(r.xi.data(), r.xi.data() + r.xi.size())},
          {"error", r.error},
          {"error_space", "coefficient_l2"},
          {"steps", r.steps},
          {"converged", r.converged},
          {"trajectory", r.trajectory}};
}

void write_effect_csv(const EffectField& field, const std::filesystem::path& path) {
  std::string out = "vertex,delta\n";
  for (Eigen::Index v = 0; v < field.delta.size(); ++v) out += fmt::format("{},{}\n", v, format_real(field.delta[v]));
  write_text_file(path, out);
}

}  // namespace semantify
