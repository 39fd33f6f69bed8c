#include "semantify/external_backend.hpp"

#include <mutex>

#include <fmt/format.h>
#include "httplib.h"
#include "json.hpp"

#include "semantify/error.hpp"

namespace semantify {

using nlohmann::json;

struct ExternalBackend::Client {
  explicit Client(const std::string& endpoint) : http(endpoint) {}
  std::mutex mutex;
  httplib::Client http;
};

ExternalBackend::ExternalBackend(std::string endpoint, int timeout_seconds)
    : client_(std::make_unique<Client>(endpoint)), endpoint_(std::move(endpoint)) {
  if (!client_->http.is_valid()) throw ArgumentError(fmt::format("invalid endpoint '{}'", endpoint_));
  client_->http.set_connection_timeout(timeout_seconds, 0);
  client_->http.set_read_timeout(timeout_seconds, 0);
}

ExternalBackend::~ExternalBackend() = default;

namespace {

Embedding parse_embedding(const httplib::Result& res, const std::string& what) {
  if (!res) throw IoError(fmt::format("embedding server unreachable ({}): {}", what, httplib::to_string(res.error())));
  if (res->status != 200)
    throw IoError(fmt::format("embedding server returned {} for {}", res->status, what));
  try {
    const auto values = json::parse(res->body).at("embedding").get<std::vector<double>>();
    return Embedding::normalized(
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed embedding response for {}: {}", what, e.what()));
  }
}

}  // namespace

Embedding ExternalBackend::embed_text(const std::string& text) const {
  std::lock_guard lock(client_->mutex);
  const json body = {{"text", text}};
  return parse_embedding(client_->http.Post("/embed/text", body.dump(), "application/json"),
                         fmt::format("text '{}'", text));
}

Embedding ExternalBackend::embed_image(const Image& image) const {
  const auto png = encode_png(image);
  std::lock_guard lock(client_->mutex);
  return parse_embedding(
      client_->http.Post("/embed/image", reinterpret_cast<const char*>(png.data()), png.size(), "image/png"),
      "image");
}

}  // namespace semantify
