#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "semantify/mapper.hpp"
#include "semantify/morphable_model.hpp"
#include "semantify/scorer.hpp"

namespace semantify {

struct ServiceConfig {
  std::filesystem::path artifact_dir = "artifacts";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string scorer_backend = "none";  // none | external | synthetic
  std::string scorer_endpoint;          // external
  std::filesystem::path synthetic_config;
  std::string prompt_template;
  std::size_t cache_size = 64;

  /// Defaults, then the optional JSON file, then SEMANTIFY_ARTIFACT_DIR,
  /// SEMANTIFY_PORT, SEMANTIFY_SCORER_BACKEND, SEMANTIFY_SCORER_ENDPOINT and
  /// SEMANTIFY_CACHE_SIZE.
  static ServiceConfig load(const std::optional<std::filesystem::path>& file);
  void validate() const;
};

/// Immutable snapshot of the artifact directory:
///   <artifact_dir>/models/<name>      model directory or .zip
///   <artifact_dir>/mappers/<id>/      mapper.json + weights.bin
/// Mappers whose model is missing are skipped.
struct Registry {
  std::map<std::string, std::shared_ptr<const MorphableModel>> models;
  std::map<std::string, std::shared_ptr<const MapperArtifact>> mappers;

  static std::shared_ptr<const Registry> load(const std::filesystem::path& artifact_dir);
};

/// Places `artifact` (and its model when given) into the registry layout.
void publish_mapper(const std::filesystem::path& artifact_dir, const MapperArtifact& artifact,
                    const std::filesystem::path& mapper_dir, const std::optional<std::filesystem::path>& model_path);

/// Builds the backend named by the config; null for "none".
std::shared_ptr<const ScorerBackend> make_scorer_backend(const ServiceConfig& cfg);

/// HTTP front end over a reloadable registry.
///
///   GET  /api/health
///   GET  /api/mappers
///   POST /api/mappers/{id}/map          {"scores": [...]} -> xi + mesh (JSON)
///   POST /api/mappers/{id}/map.bin      same request, binary vertex buffer
///   GET  /api/mappers/{id}/faces.bin    u32 count, then u32 indices
///   POST /api/mappers/{id}/zero_shot    multipart field "image" or raw PNG
///   GET  /api/mappers/{id}/coverage?tau=0.3
///   POST /api/admin/reload
class Service {
 public:
  explicit Service(ServiceConfig cfg, std::shared_ptr<const ScorerBackend> backend = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Re-reads the artifact directory and swaps it in; the old registry stays
  /// live when loading fails.
  void reload();
  std::shared_ptr<const Registry> registry() const;

  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind();
  /// Blocks serving requests until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace semantify
