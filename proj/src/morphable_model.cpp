#include "semantify/morphable_model.hpp"

#include <cmath>

#include <fmt/format.h>
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/error.hpp"

namespace semantify {

using nlohmann::json;

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::body: return "body";
    case ModelFamily::face_shape: return "face_shape";
    case ModelFamily::face_expression: return "face_expression";
    case ModelFamily::animal: return "animal";
  }
  return "body";
}

ModelFamily parse_model_family(std::string_view text) {
  if (text == "body") return ModelFamily::body;
  if (text == "face_shape") return ModelFamily::face_shape;
  if (text == "face_expression") return ModelFamily::face_expression;
  if (text == "animal") return ModelFamily::animal;
  throw DataError(fmt::format("unknown model family '{}'", text));
}

double sampling_clamp(ModelFamily family) {
  return family == ModelFamily::face_expression ? 4.0 : 2.0;
}

MorphableModel::MorphableModel(std::string model_id, ModelFamily family,
                               Vertices template_vertices, Faces faces, Eigen::MatrixXd basis,
                               Eigen::VectorXd sigma, NeutralPose neutral_pose)
    : model_id_(std::move(model_id)),
      family_(family),
      template_(std::move(template_vertices)),
      faces_(std::move(faces)),
      neutral_pose_(std::move(neutral_pose)) {
  const Eigen::Index n = template_.rows();
  if (n == 0) throw DataError("model has no vertices");
  if (basis.rows() != 3 * n)
    throw DimensionError(fmt::format("basis has {} rows, expected 3N = {}", basis.rows(), 3 * n));
  if (basis.cols() < kNumCoefficients)
    throw DimensionError(fmt::format("basis has {} columns, at least {} required", basis.cols(),
                                     kNumCoefficients));
  if (sigma.size() < kNumCoefficients)
    throw DimensionError(fmt::format("sigma has {} entries, at least {} required", sigma.size(),
                                     kNumCoefficients));
  basis_ = basis.leftCols(kNumCoefficients);
  sigma_ = sigma.head(kNumCoefficients);
  if (!template_.allFinite() || !basis_.allFinite()) throw DataError("model arrays contain non-finite values");
  for (int i = 0; i < kNumCoefficients; ++i)
    if (!(sigma_[i] > 0.0)) throw DataError(fmt::format("sigma[{}] = {} is not positive", i, sigma_[i]));
  for (Eigen::Index f = 0; f < faces_.rows(); ++f)
    for (int c = 0; c < 3; ++c)
      if (faces_(f, c) >= static_cast<std::uint32_t>(n))
        throw DataError(fmt::format("face {} references vertex {} >= N = {}", f, faces_(f, c), n));
}

Mesh synthesize(const MorphableModel& model, const CoefficientVector& coeffs) {
  if (!coeffs.allFinite()) throw ArgumentError("coefficient vector has non-finite entries");
  const Eigen::VectorXd offsets = model.basis() * coeffs;
  Mesh mesh{model.template_vertices(), model.faces()};
  mesh.vertices += Eigen::Map<const Vertices>(offsets.data(), model.vertex_count(), 3);
  // Neutral pose: identity transform.
  return mesh;
}

CoefficientVector sample_coefficients(const MorphableModel& model, Rng& rng,
                                      SamplingDistribution distribution) {
  const double k = sampling_clamp(model.family());
  CoefficientVector xi;
  for (int i = 0; i < kNumCoefficients; ++i) {
    const double bound = k * model.sigma()[i];
    if (distribution == SamplingDistribution::uniform) {
      xi[i] = rng.uniform(-bound, bound);
    } else {
      double z;
      do {
        z = rng.normal();
      } while (std::abs(z) > k);
      xi[i] = z * model.sigma()[i];
    }
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Archive I/O

namespace {

struct Manifest {
  std::string model_id;
  ModelFamily family;
  std::size_t n = 0;
  std::size_t f = 0;
  std::size_t basis_columns = 0;
  ArchiveDtype dtype = ArchiveDtype::f32;
  NeutralPose neutral_pose;
};

Manifest parse_manifest(const Bytes& bytes) {
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError(fmt::format("manifest.json: {}", e.what()));
  }
  Manifest m;
  try {
    m.model_id = j.at("model_id").get<std::string>();
    m.family = parse_model_family(j.at("family").get<std::string>());
    m.n = j.at("N").get<std::size_t>();
    m.f = j.at("F").get<std::size_t>();
    m.basis_columns = j.at("basis_columns").get<std::size_t>();
    const auto dtype = j.at("dtype").get<std::string>();
    if (dtype == "f32") {
      m.dtype = ArchiveDtype::f32;
    } else if (dtype == "f64") {
      m.dtype = ArchiveDtype::f64;
    } else {
      throw DataError(fmt::format("manifest.json: unsupported dtype '{}'", dtype));
    }
    const auto endianness = j.value("endianness", std::string("little"));
    if (endianness != "little")
      throw DataError(fmt::format("manifest.json: unsupported endianness '{}'", endianness));
    if (j.contains("neutral_pose")) {
      const auto& np = j["neutral_pose"];
      m.neutral_pose.pose = np.value("pose", std::vector<double>{});
      m.neutral_pose.translation = np.value("translation", std::array<double, 3>{0, 0, 0});
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("manifest.json: {}", e.what()));
  }
  return m;
}

std::vector<double> decode_reals(const Bytes& bytes, ArchiveDtype dtype) {
  if (dtype == ArchiveDtype::f64) return decode_f64_le(bytes);
  const auto floats = decode_f32_le(bytes);
  return {floats.begin(), floats.end()};
}

const Bytes& entry(const std::map<std::string, Bytes>& files, const std::string& name) {
  const auto it = files.find(name);
  if (it == files.end()) throw DataError(fmt::format("model archive is missing '{}'", name));
  return it->second;
}

}  // namespace

MorphableModel load_model(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw IoError(fmt::format("model archive '{}' does not exist", path.string()));

  std::map<std::string, Bytes> files;
  if (fs::is_directory(path)) {
    for (const char* name : {"manifest.json", "template.bin", "faces.bin", "basis.bin", "sigma.bin"})
      if (fs::exists(path / name)) files.emplace(name, read_file(path / name));
  } else {
    files = read_zip(path);
  }

  const Manifest m = parse_manifest(entry(files, "manifest.json"));
  const auto tmpl = decode_reals(entry(files, "template.bin"), m.dtype);
  const auto faces = decode_u32_le(entry(files, "faces.bin"));
  const auto basis = decode_reals(entry(files, "basis.bin"), m.dtype);
  const auto sigma = decode_reals(entry(files, "sigma.bin"), m.dtype);

  if (tmpl.size() != 3 * m.n)
    throw DimensionError(fmt::format("template.bin holds {} values, expected 3N = {}", tmpl.size(), 3 * m.n));
  if (faces.size() != 3 * m.f)
    throw DimensionError(fmt::format("faces.bin holds {} indices, expected 3F = {}", faces.size(), 3 * m.f));
  if (m.basis_columns < static_cast<std::size_t>(kNumCoefficients))
    throw DimensionError(fmt::format("archive stores {} basis columns, at least {} required",
                                     m.basis_columns, kNumCoefficients));
  if (basis.size() % m.basis_columns != 0 || basis.size() / m.basis_columns != 3 * m.n)
    throw DimensionError(fmt::format("basis.bin holds {} values, expected 3N x k = {} x {}",
                                     basis.size(), 3 * m.n, m.basis_columns));
  if (sigma.size() != m.basis_columns)
    throw DimensionError(fmt::format("sigma.bin holds {} values, expected {}", sigma.size(), m.basis_columns));

  const auto n = static_cast<Eigen::Index>(m.n);
  const auto k = static_cast<Eigen::Index>(m.basis_columns);
  Vertices vertices = Eigen::Map<const Vertices>(tmpl.data(), n, 3);
  Faces face_array = Eigen::Map<const Faces>(faces.data(), static_cast<Eigen::Index>(m.f), 3);
  using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXd basis_matrix = Eigen::Map<const RowMajorXd>(basis.data(), 3 * n, k);
  Eigen::VectorXd sigma_vector = Eigen::Map<const Eigen::VectorXd>(sigma.data(), k);
  return MorphableModel(m.model_id, m.family, std::move(vertices), std::move(face_array),
                        std::move(basis_matrix), std::move(sigma_vector), m.neutral_pose);
}

void save_model(const MorphableModel& model, const std::filesystem::path& path, ArchiveDtype dtype) {
  const auto put = [dtype](Bytes& out, double v) {
    if (dtype == ArchiveDtype::f32) {
      append_f32_le(out, static_cast<float>(v));
    } else {
      append_f64_le(out, v);
    }
  };

  std::map<std::string, Bytes> files;
  json manifest = {
      {"model_id", model.model_id()},
      {"family", std::string(to_string(model.family()))},
      {"N", model.vertex_count()},
      {"F", model.face_count()},
      {"basis_columns", kNumCoefficients},
      {"dtype", dtype == ArchiveDtype::f32 ? "f32" : "f64"},
      {"endianness", "little"},
      {"neutral_pose",
       {{"pose", model.neutral_pose().pose}, {"translation", model.neutral_pose().translation}}},
  };
  const std::string text = manifest.dump(2);
  files["manifest.json"] = Bytes(text.begin(), text.end());

  Bytes& tmpl = files["template.bin"];
  for (Eigen::Index v = 0; v < model.vertex_count(); ++v)
    for (int c = 0; c < 3; ++c) put(tmpl, model.template_vertices()(v, c));
  Bytes& faces = files["faces.bin"];
  for (Eigen::Index f = 0; f < model.face_count(); ++f)
    for (int c = 0; c < 3; ++c) append_u32_le(faces, model.faces()(f, c));
  Bytes& basis = files["basis.bin"];
  for (Eigen::Index r = 0; r < model.basis().rows(); ++r)
    for (int c = 0; c < kNumCoefficients; ++c) put(basis, model.basis()(r, c));
  Bytes& sigma = files["sigma.bin"];
  for (int c = 0; c < kNumCoefficients; ++c) put(sigma, model.sigma()[c]);

  if (path.extension() == ".zip") {
    write_zip(path, files);
  } else {
    std::filesystem::create_directories(path);
    for (const auto& [name, bytes] : files) write_file(path / name, bytes);
  }
}

}  // namespace semantify
