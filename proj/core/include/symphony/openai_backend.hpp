#pragma once

#include "symphony/config.hpp"
#include "symphony/model.hpp"
#include "symphony/wire.hpp"

#include <map>

namespace symphony {

/// HTTP backend speaking the OpenAI-compatible protocol, one endpoint per
/// role. Frames are loaded (and capped at 720p) only while serializing.
class OpenAiBackend : public ModelBackend {
 public:
  explicit OpenAiBackend(std::map<BackendRole, EndpointConfig> endpoints,
                         FrameBytesLoader loader = {});

  Completion complete(const ChatRequest& request) override;
  Embedding embed_text(std::string_view text) override;
  Embedding embed_image(const Frame& frame) override;

 private:
  const EndpointConfig& endpoint(BackendRole role) const;
  std::string post(const EndpointConfig& ep, std::string_view path, const std::string& body);

  std::map<BackendRole, EndpointConfig> endpoints_;
  FrameBytesLoader loader_;
};

}  // namespace symphony
