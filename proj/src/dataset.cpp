#include "semantify/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/csv.hpp"
#include "semantify/error.hpp"

namespace semantify {

using nlohmann::json;

RenderConfig RenderConfig::defaults_for(ModelFamily family) {
  RenderConfig cfg;
  const bool face = family == ModelFamily::face_shape || family == ModelFamily::face_expression;
  cfg.views = orbit_views(face ? 1 : 3);
  return cfg;
}

std::vector<CameraPose> RenderConfig::orbit_views(int count, double distance) {
  // 0, -45, +45, -90, +90, ...
  std::vector<CameraPose> views;
  for (int i = 0; i < count; ++i) {
    const int step = (i + 1) / 2;
    const double az = (i % 2 == 1 ? -45.0 : 45.0) * step;
    views.push_back(CameraPose{az, 0.0, distance});
  }
  return views;
}

void RenderConfig::validate() const {
  if (views.empty()) throw ArgumentError("render config needs at least one view");
  if (image_size < 64) throw ArgumentError(fmt::format("image_size {} is below 64", image_size));
  if (texture_pool_size < 1) throw ArgumentError("texture_pool_size must be >= 1");
}

std::string sample_id_for(std::size_t index) { return fmt::format("s{:06d}", index); }

std::vector<Image> render_views(const Mesh& mesh, const RenderConfig& cfg,
                                const RendererBackend& renderer, int sample_index) {
  cfg.validate();
  validate_renderable(mesh);
  RenderRequest request;
  request.image_size = cfg.image_size;
  request.background = cfg.background;
  request.material = cfg.material;
  if (cfg.material.kind == Material::Kind::textured && cfg.texture_pool_size > 1)
    request.material.pool_id = (cfg.material.pool_id + sample_index) % cfg.texture_pool_size;

  std::vector<Image> images;
  images.reserve(cfg.views.size());
  for (const auto& view : cfg.views) {
    request.camera = view;
    images.push_back(renderer.render(mesh, request));
  }
  return images;
}

namespace {

json to_json(const RenderConfig& cfg) {
  json views = json::array();
  for (const auto& v : cfg.views)
    views.push_back({{"azimuth_deg", v.azimuth_deg},
                     {"elevation_deg", v.elevation_deg},
                     {"distance", v.distance},
                     {"fov_deg", v.fov_deg}});
  return {{"views", views},
          {"image_size", cfg.image_size},
          {"material",
           {{"kind", cfg.material.kind == Material::Kind::textured ? "textured" : "flat_gray"},
            {"pool_id", cfg.material.pool_id}}},
          {"texture_pool_size", cfg.texture_pool_size},
          {"background", cfg.background}};
}

RenderConfig render_config_from_json(const json& j) {
  RenderConfig cfg;
  for (const auto& v : j.at("views"))
    cfg.views.push_back(CameraPose{v.at("azimuth_deg").get<double>(), v.at("elevation_deg").get<double>(),
                                   v.at("distance").get<double>(), v.value("fov_deg", 40.0)});
  cfg.image_size = j.at("image_size").get<int>();
  const auto& m = j.at("material");
  cfg.material = m.at("kind").get<std::string>() == "textured"
                     ? Material::textured(m.value("pool_id", 0))
                     : Material::flat_gray();
  cfg.texture_pool_size = j.value("texture_pool_size", 1);
  cfg.background = j.value("background", Rgb{255, 255, 255});
  return cfg;
}

}  // namespace

DatasetManifest build_dataset(const MorphableModel& model, std::size_t n_samples,
                              const RenderConfig& cfg, const RendererBackend& renderer,
                              const std::filesystem::path& out_dir, std::uint64_t seed,
                              SamplingDistribution distribution) {
  cfg.validate();
  std::filesystem::create_directories(out_dir / "images");

  // Coefficients are drawn up front so record order and values never depend
  // on render scheduling.
  Rng rng(seed);
  std::vector<CoefficientVector> xis(n_samples);
  for (auto& xi : xis) xi = sample_coefficients(model, rng, distribution);

  std::vector<std::optional<std::string>> failures(n_samples);
  std::vector<std::vector<std::string>> paths(n_samples);

  auto work = [&](std::size_t i) {
    const std::string id = sample_id_for(i);
    try {
      const Mesh mesh = synthesize(model, xis[i]);
      const auto images = render_views(mesh, cfg, renderer, static_cast<int>(i));
      for (std::size_t v = 0; v < images.size(); ++v) {
        const std::string rel = fmt::format("images/{}_v{}.png", id, v);
        write_png(out_dir / rel, images[v]);
        paths[i].push_back(rel);
      }
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };

  const unsigned workers =
      renderer.parallel_safe() ? std::max(1u, std::thread::hardware_concurrency()) : 1u;
  if (workers <= 1 || n_samples < 2) {
    for (std::size_t i = 0; i < n_samples; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < n_samples; i = next++) {
            try {
              work(i);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              if (!error) error = std::current_exception();
            }
          }
        });
      }
    }
    if (error) std::rethrow_exception(error);
  }

  DatasetManifest manifest;
  manifest.model_id = model.model_id();
  manifest.rng_seed = seed;
  manifest.distribution = distribution;
  manifest.render_config = cfg;
  manifest.root = out_dir;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (failures[i]) {
      spdlog::warn("sample {} skipped: {}", sample_id_for(i), *failures[i]);
      manifest.gaps.push_back({sample_id_for(i), *failures[i]});
      continue;
    }
    manifest.records.push_back({sample_id_for(i), xis[i], std::move(paths[i])});
  }
  manifest.n_samples = manifest.records.size();
  save_manifest(manifest, out_dir);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  json records = json::array();
  for (const auto& r : manifest.records)
    records.push_back({{"sample_id", r.sample_id},
                       {"xi", std::vector<double>(r.xi.data(), r.xi.data() + kNumCoefficients)},
                       {"image_paths", r.image_paths}});
  json gaps = json::array();
  for (const auto& g : manifest.gaps) gaps.push_back({{"sample_id", g.sample_id}, {"reason", g.reason}});
  const json j = {
      {"model_id", manifest.model_id},
      {"n_samples", manifest.n_samples},
      {"rng_seed", manifest.rng_seed},
      {"distribution",
       manifest.distribution == SamplingDistribution::uniform ? "uniform" : "truncated_normal"},
      {"render_config", to_json(manifest.render_config)},
      {"records", records},
      {"gaps", gaps},
  };
  write_text_file(dir / "dataset.json", j.dump(1) + "\n");
  write_text_file(dir / "coeffs.csv", coefficients_csv(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "dataset.json";
  if (!std::filesystem::exists(path)) throw IoError(fmt::format("'{}' does not exist", path.string()));
  DatasetManifest m;
  try {
    const json j = json::parse(read_text_file(path));
    m.model_id = j.at("model_id").get<std::string>();
    m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    m.distribution = j.value("distribution", std::string("uniform")) == "uniform"
                         ? SamplingDistribution::uniform
                         : SamplingDistribution::truncated_normal;
    m.render_config = render_config_from_json(j.at("render_config"));
    for (const auto& r : j.at("records")) {
      DatasetRecord rec;
      rec.sample_id = r.at("sample_id").get<std::string>();
      const auto xi = r.at("xi").get<std::vector<double>>();
      if (xi.size() != static_cast<std::size_t>(kNumCoefficients))
        throw DimensionError(fmt::format("record {} has {} coefficients", rec.sample_id, xi.size()));
      rec.xi = Eigen::Map<const CoefficientVector>(xi.data());
      rec.image_paths = r.at("image_paths").get<std::vector<std::string>>();
      m.records.push_back(std::move(rec));
    }
    for (const auto& g : j.value("gaps", json::array()))
      m.gaps.push_back({g.at("sample_id").get<std::string>(), g.at("reason").get<std::string>()});
    m.n_samples = j.at("n_samples").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  if (m.n_samples != m.records.size())
    throw DataError(fmt::format("'{}': n_samples {} != {} records", path.string(), m.n_samples,
                                m.records.size()));
  m.root = dir;
  return m;
}

std::string coefficients_csv(const DatasetManifest& manifest) {
  std::string out = "sample_id";
  for (int i = 0; i < kNumCoefficients; ++i) out += fmt::format(",xi_{}", i);
  out += '\n';
  for (const auto& r : manifest.records) {
    out += r.sample_id;
    for (int i = 0; i < kNumCoefficients; ++i) out += "," + format_real(r.xi[i]);
    out += '\n';
  }
  return out;
}

CoefficientTable read_coefficients_csv(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  if (csv.header.size() != static_cast<std::size_t>(kNumCoefficients) + 1 || csv.header[0] != "sample_id")
    throw DataError(fmt::format("'{}' is not a coefficient table", path.string()));
  CoefficientTable table;
  for (const auto& row : csv.rows) {
    table.sample_ids.push_back(row[0]);
    CoefficientVector xi;
    for (int i = 0; i < kNumCoefficients; ++i) xi[i] = parse_real(row[i + 1]);
    table.rows.push_back(xi);
  }
  return table;
}

}  // namespace semantify
