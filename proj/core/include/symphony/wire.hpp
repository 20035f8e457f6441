#pragma once

// OpenAI-compatible chat-completions and embeddings wire format.

#include "symphony/model.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <string_view>

namespace symphony {

struct EncodedImage {
  std::string mime;   // e.g. "image/jpeg"
  std::string bytes;  // encoded file contents
};

using FrameBytesLoader = std::function<EncodedImage(const Frame&)>;

std::string base64_encode(std::string_view bytes);
std::string data_url(const EncodedImage& image);

/// Request body for POST {endpoint}/chat/completions. Keys are emitted in a
/// fixed order so identical requests serialize to identical bytes. A message
/// that is a single text part uses the plain-string `content` form; anything
/// else uses the array form with `image_url` data-URL parts.
nlohmann::ordered_json chat_request_body(std::string_view model, const ChatRequest& request,
                                         const FrameBytesLoader& load);

/// Request bodies for POST {endpoint}/embeddings. Images go out as
/// `{"image": "<data url>"}` input items, the convention shared by the common
/// CLIP-serving embedding servers.
nlohmann::ordered_json text_embedding_body(std::string_view model, std::string_view text);
nlohmann::ordered_json image_embedding_body(std::string_view model, const EncodedImage& image);

/// Throws HttpStatus with the body excerpt when the payload is not a
/// well-formed response.
Completion parse_chat_response(std::string_view body);
Embedding parse_embedding_response(std::string_view body);

}  // namespace symphony
