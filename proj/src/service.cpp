#include "semantify/service.hpp"

#include <cstdlib>
#include <list>
#include <mutex>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "httplib.h"
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/csv.hpp"
#include "semantify/error.hpp"
#include "semantify/evaluation.hpp"
#include "semantify/external_backend.hpp"
#include "semantify/synthetic_backend.hpp"

namespace semantify {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

long parse_long(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError(fmt::format("{} must be an integer, got '{}'", what, text));
  }
}

}  // namespace

ServiceConfig ServiceConfig::load(const std::optional<std::filesystem::path>& file) {
  ServiceConfig c;
  if (file) {
    if (!std::filesystem::exists(*file)) throw IoError(fmt::format("config '{}' does not exist", file->string()));
    try {
      const json j = json::parse(read_text_file(*file));
      const auto base = file->parent_path();
      const auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_relative() ? base / path : path;
      };
      if (j.contains("artifact_dir")) c.artifact_dir = resolve(j.at("artifact_dir").get<std::string>());
      c.host = j.value("host", c.host);
      c.port = j.value("port", c.port);
      c.scorer_backend = j.value("scorer_backend", c.scorer_backend);
      c.scorer_endpoint = j.value("scorer_endpoint", c.scorer_endpoint);
      if (j.contains("synthetic_config")) c.synthetic_config = resolve(j.at("synthetic_config").get<std::string>());
      c.prompt_template = j.value("prompt_template", c.prompt_template);
      c.cache_size = j.value("cache_size", c.cache_size);
    } catch (const json::exception& e) {
      throw DataError(fmt::format("config '{}': {}", file->string(), e.what()));
    }
  }
  if (auto v = env("SEMANTIFY_ARTIFACT_DIR")) c.artifact_dir = *v;
  if (auto v = env("SEMANTIFY_PORT")) c.port = static_cast<int>(parse_long(*v, "SEMANTIFY_PORT"));
  if (auto v = env("SEMANTIFY_SCORER_BACKEND")) c.scorer_backend = *v;
  if (auto v = env("SEMANTIFY_SCORER_ENDPOINT")) c.scorer_endpoint = *v;
  if (auto v = env("SEMANTIFY_CACHE_SIZE")) {
    const long n = parse_long(*v, "SEMANTIFY_CACHE_SIZE");
    if (n < 0) throw ArgumentError("SEMANTIFY_CACHE_SIZE must be >= 0");
    c.cache_size = static_cast<std::size_t>(n);
  }
  c.validate();
  return c;
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ArgumentError(fmt::format("port {} is out of range", port));
  if (scorer_backend != "none" && scorer_backend != "external" && scorer_backend != "synthetic")
    throw ArgumentError(fmt::format("unknown scorer backend '{}' (none|external|synthetic)", scorer_backend));
  if (scorer_backend == "external" && scorer_endpoint.empty())
    throw ArgumentError("the external scorer backend needs an endpoint");
  if (scorer_backend == "synthetic" && synthetic_config.empty())
    throw ArgumentError("the synthetic scorer backend needs its config file");
}

std::shared_ptr<const ScorerBackend> make_scorer_backend(const ServiceConfig& cfg) {
  if (cfg.scorer_backend == "external") return std::make_shared<ExternalBackend>(cfg.scorer_endpoint);
  if (cfg.scorer_backend == "synthetic")
    return std::make_shared<SyntheticBackend>(load_synthetic_backend(cfg.synthetic_config));
  return nullptr;
}

// ---------------------------------------------------------------------------
// Registry

std::shared_ptr<const Registry> Registry::load(const std::filesystem::path& artifact_dir) {
  auto reg = std::make_shared<Registry>();
  if (!std::filesystem::is_directory(artifact_dir)) {
    spdlog::warn("artifact directory '{}' does not exist; registry is empty", artifact_dir.string());
    return reg;
  }
  const auto sorted_entries = [](const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (std::filesystem::is_directory(dir))
      for (const auto& e : std::filesystem::directory_iterator(dir)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  };
  for (const auto& p : sorted_entries(artifact_dir / "models")) {
    try {
      auto model = std::make_shared<const MorphableModel>(load_model(p));
      const auto id = model->model_id();
      if (reg->models.contains(id)) spdlog::warn("duplicate model id '{}' in '{}'", id, p.string());
      reg->models[id] = std::move(model);
    } catch (const Error& e) {
      spdlog::warn("skipping model '{}': {}", p.string(), e.what());
    }
  }
  for (const auto& p : sorted_entries(artifact_dir / "mappers")) {
    if (!std::filesystem::exists(p / "mapper.json")) continue;
    try {
      MapperArtifact art = load_mapper(p);
      art.mapper_id = p.filename().string();
      if (!reg->models.contains(art.model_id)) {
        spdlog::warn("skipping mapper '{}': model '{}' is not loaded", art.mapper_id, art.model_id);
        continue;
      }
      auto id = art.mapper_id;
      reg->mappers[std::move(id)] = std::make_shared<const MapperArtifact>(std::move(art));
    } catch (const Error& e) {
      spdlog::warn("skipping mapper '{}': {}", p.string(), e.what());
    }
  }
  return reg;
}

void publish_mapper(const std::filesystem::path& artifact_dir, const MapperArtifact& artifact,
                    const std::filesystem::path& mapper_dir, const std::optional<std::filesystem::path>& model_path) {
  const auto dest = artifact_dir / "mappers" / artifact.mapper_id;
  std::filesystem::create_directories(dest);
  for (const char* name : {"mapper.json", "weights.bin"})
    std::filesystem::copy_file(mapper_dir / name, dest / name, std::filesystem::copy_options::overwrite_existing);
  if (model_path) {
    const auto models = artifact_dir / "models";
    std::filesystem::create_directories(models);
    const auto target = models / model_path->filename();
    if (std::filesystem::exists(target)) {
      if (std::filesystem::equivalent(*model_path, target)) return;
      std::filesystem::remove_all(target);
    }
    std::filesystem::copy(*model_path, target, std::filesystem::copy_options::recursive);
  }
}

// ---------------------------------------------------------------------------
// Service

namespace {

class LruCache {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  std::optional<std::string> get(const std::string& key) {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put(const std::string& key, std::string value) {
    if (capacity_ == 0) return;
    std::lock_guard lock(mutex_);
    if (const auto it = index_.find(key); it != index_.end()) {
      it->second->second = std::move(value);
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  void clear() {
    std::lock_guard lock(mutex_);
    order_.clear();
    index_.clear();
  }

 private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::list<std::pair<std::string, std::string>> order_;
  std::unordered_map<std::string, std::list<std::pair<std::string, std::string>>::iterator> index_;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json mesh_json(const Mesh& mesh) {
  std::vector<double> v(mesh.vertices.data(), mesh.vertices.data() + mesh.vertices.size());
  std::vector<std::uint32_t> f(mesh.faces.data(), mesh.faces.data() + mesh.faces.size());
  return {{"vertex_count", mesh.vertices.rows()}, {"face_count", mesh.faces.rows()}, {"vertices", v}, {"faces", f}};
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Parses {"scores": [numbers]}; returns an error message on failure.
std::optional<std::string> parse_scores(const std::string& body, Eigen::VectorXd& out) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return "request body is not valid JSON";
  }
  if (!j.is_object() || !j.contains("scores") || !j.at("scores").is_array())
    return "request body must be an object with a 'scores' array";
  const auto& s = j.at("scores");
  out.resize(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i].is_number()) return fmt::format("scores[{}] is not a number", i);
    out[static_cast<Eigen::Index>(i)] = s[i].get<double>();
  }
  return std::nullopt;
}

}  // namespace

struct Service::Impl {
  ServiceConfig cfg;
  std::shared_ptr<const ScorerBackend> backend;
  mutable std::mutex registry_mutex;
  std::shared_ptr<const Registry> registry;
  LruCache coverage_cache;
  httplib::Server server;
  int bound_port = -1;

  Impl(ServiceConfig c, std::shared_ptr<const ScorerBackend> b)
      : cfg(std::move(c)), backend(std::move(b)), coverage_cache(cfg.cache_size) {}

  std::shared_ptr<const Registry> snapshot() const {
    std::lock_guard lock(registry_mutex);
    return registry;
  }

  // Looks up the mapper and its model; sends 404 and returns false when absent.
  bool find(const httplib::Request& req, httplib::Response& res, std::shared_ptr<const MapperArtifact>& mapper,
            std::shared_ptr<const MorphableModel>& model) const {
    const auto reg = snapshot();
    const std::string id = req.matches[1];
    const auto it = reg->mappers.find(id);
    if (it == reg->mappers.end()) {
      send_error(res, 404, fmt::format("unknown mapper '{}'", id));
      return false;
    }
    mapper = it->second;
    model = reg->models.at(mapper->model_id);
    return true;
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const ArgumentError& e) {
        send_error(res, 400, e.what());
      } catch (const DimensionError& e) {
        send_error(res, 400, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Get("/api/mappers", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& [id, art] : snapshot()->mappers) {
        json descs = json::array();
        for (const auto& r : slider_ranges(*art))
          descs.push_back({{"id", r.id}, {"text", r.text}, {"lo", r.lo}, {"hi", r.hi}, {"default", r.default_value}});
        out.push_back({{"mapper_id", id}, {"model_id", art->model_id}, {"d", art->d()}, {"descriptors", descs}});
      }
      send_json(res, 200, out);
    });

    const auto map_request = [this](const httplib::Request& req, httplib::Response& res, bool binary) {
      Eigen::VectorXd omega;
      if (const auto err = parse_scores(req.body, omega)) return send_error(res, 400, *err);
      std::shared_ptr<const MapperArtifact> art;
      std::shared_ptr<const MorphableModel> model;
      if (!find(req, res, art, model)) return;
      if (omega.size() != static_cast<Eigen::Index>(art->d()))
        return send_error(res, 400, fmt::format("mapper '{}' expects {} scores, got {}", art->mapper_id, art->d(),
                                                omega.size()));
      const CoefficientVector xi = predict(*art, omega);
      const Mesh mesh = synthesize(*model, xi);
      if (!binary) {
        send_json(res, 200, {{"mapper_id", art->mapper_id}, {"xi", to_vector(xi)}, {"mesh", mesh_json(mesh)}});
        return;
      }
      Bytes out;
      append_u32_le(out, static_cast<std::uint32_t>(mesh.vertices.rows()));
      for (Eigen::Index i = 0; i < xi.size(); ++i) append_f32_le(out, static_cast<float>(xi[i]));
      for (Eigen::Index i = 0; i < mesh.vertices.size(); ++i)
        append_f32_le(out, static_cast<float>(mesh.vertices.data()[i]));
      res.status = 200;
      res.set_content(std::string(out.begin(), out.end()), "application/octet-stream");
    };
    server.Post(R"(/api/mappers/([^/]+)/map)",
                [map_request](const httplib::Request& req, httplib::Response& res) { map_request(req, res, false); });
    server.Post(R"(/api/mappers/([^/]+)/map\.bin)",
                [map_request](const httplib::Request& req, httplib::Response& res) { map_request(req, res, true); });

    server.Get(R"(/api/mappers/([^/]+)/faces\.bin)", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<const MapperArtifact> art;
      std::shared_ptr<const MorphableModel> model;
      if (!find(req, res, art, model)) return;
      Bytes out;
      append_u32_le(out, static_cast<std::uint32_t>(model->face_count()));
      const auto& f = model->faces();
      for (Eigen::Index i = 0; i < f.size(); ++i) append_u32_le(out, f.data()[i]);
      res.status = 200;
      res.set_content(std::string(out.begin(), out.end()), "application/octet-stream");
    });

    server.Post(R"(/api/mappers/([^/]+)/zero_shot)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!backend) return send_error(res, 503, "no scorer backend is configured");
      std::string bytes;
      if (req.has_file("image")) {
        bytes = req.get_file_value("image").content;
      } else if (!req.is_multipart_form_data() && !req.body.empty()) {
        bytes = req.body;
      } else {
        return send_error(res, 400, "expected a multipart field 'image' or a PNG body");
      }
      Image image;
      try {
        image = decode_png(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
      } catch (const DataError& e) {
        return send_error(res, 415, fmt::format("unsupported image: {}", e.what()));
      }
      std::shared_ptr<const MapperArtifact> art;
      std::shared_ptr<const MorphableModel> model;
      if (!find(req, res, art, model)) return;
      std::string prompt = cfg.prompt_template;
      if (const auto* synth = dynamic_cast<const SyntheticBackend*>(backend.get())) prompt = synth->prompt_template();
      ZeroShotResult r;
      try {
        r = zero_shot_fit(image, *backend, *art, prompt);
      } catch (const DataError& e) {
        return send_error(res, 422, e.what());
      } catch (const IoError& e) {
        return send_error(res, 502, e.what());
      }
      send_json(res, 200,
                {{"mapper_id", art->mapper_id},
                 {"descriptors", art->descriptor_ids()},
                 {"scores", to_vector(r.omega)},
                 {"xi", to_vector(r.xi)},
                 {"mesh", mesh_json(synthesize(*model, r.xi))}});
    });

    server.Get(R"(/api/mappers/([^/]+)/coverage)", [this](const httplib::Request& req, httplib::Response& res) {
      double tau = 0.3;
      if (req.has_param("tau")) {
        const auto text = req.get_param_value("tau");
        try {
          tau = parse_real(text);
        } catch (const Error&) {
          return send_error(res, 400, fmt::format("tau '{}' is not a number", text));
        }
      }
      if (!(tau > 0.0 && tau < 1.0)) return send_error(res, 400, fmt::format("tau must be in (0, 1), got {}", tau));
      std::shared_ptr<const MapperArtifact> art;
      std::shared_ptr<const MorphableModel> model;
      if (!find(req, res, art, model)) return;
      const std::string key = fmt::format("{}|{}", art->mapper_id, format_real(tau));
      if (auto cached = coverage_cache.get(key)) {
        res.status = 200;
        res.set_content(*cached, "application/json");
        return;
      }
      json body = to_json(coverage_report(*art, *model, tau));
      body["mapper_id"] = art->mapper_id;
      std::string text = body.dump();
      coverage_cache.put(key, text);
      res.status = 200;
      res.set_content(text, "application/json");
    });

    server.Post("/api/admin/reload", [this](const httplib::Request&, httplib::Response& res) {
      try {
        reload();
      } catch (const std::exception& e) {
        return send_error(res, 500, fmt::format("reload failed: {}", e.what()));
      }
      const auto reg = snapshot();
      send_json(res, 200, {{"mappers", reg->mappers.size()}, {"models", reg->models.size()}});
    });
  }

  void reload() {
    auto next = Registry::load(cfg.artifact_dir);
    spdlog::info("registry loaded: {} mappers, {} models", next->mappers.size(), next->models.size());
    {
      std::lock_guard lock(registry_mutex);
      registry = std::move(next);
    }
    coverage_cache.clear();
  }
};

Service::Service(ServiceConfig cfg, std::shared_ptr<const ScorerBackend> backend)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(backend))) {
  impl_->cfg.validate();
  impl_->reload();
  impl_->routes();
}

Service::~Service() { stop(); }

void Service::reload() { impl_->reload(); }

std::shared_ptr<const Registry> Service::registry() const { return impl_->snapshot(); }

int Service::bind() {
  if (impl_->cfg.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->cfg.host);
  } else if (impl_->server.bind_to_port(impl_->cfg.host, impl_->cfg.port)) {
    impl_->bound_port = impl_->cfg.port;
  }
  if (impl_->bound_port < 0)
    throw IoError(fmt::format("cannot bind {}:{}", impl_->cfg.host, impl_->cfg.port));
  return impl_->bound_port;
}

void Service::listen() {
  if (impl_->bound_port < 0) bind();
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace semantify
