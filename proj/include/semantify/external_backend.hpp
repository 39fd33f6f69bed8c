#pragma once

#include <memory>
#include <string>

#include "semantify/scorer.hpp"

namespace semantify {

/// Adapter for an out-of-process vision-language embedding server.
///
/// Wire protocol (JSON responses of the form {"embedding": [floats]}):
///   POST {base}/embed/text   body {"text": "..."}     (application/json)
///   POST {base}/embed/image  body: PNG bytes          (image/png)
/// Returned vectors are normalized on receipt.
class ExternalBackend final : public ScorerBackend {
 public:
  /// `endpoint` like "http://127.0.0.1:8600".
  explicit ExternalBackend(std::string endpoint, int timeout_seconds = 30);
  ~ExternalBackend() override;

  Embedding embed_text(const std::string& text) const override;
  Embedding embed_image(const Image& image) const override;
  bool parallel_safe() const override { return false; }
  std::string name() const override { return "external"; }

 private:
  struct Client;
  std::unique_ptr<Client> client_;
  std::string endpoint_;
};

}  // namespace semantify
