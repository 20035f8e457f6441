#include "symphony/wire.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

namespace symphony {

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string data_url(const EncodedImage& image) {
  return fmt::format("data:{};base64,{}", image.mime, base64_encode(image.bytes));
}

nlohmann::ordered_json chat_request_body(std::string_view model, const ChatRequest& request,
                                         const FrameBytesLoader& load) {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) {
    nlohmann::ordered_json msg;
    msg["role"] = message_role_key(m.role);
    if (m.parts.size() == 1 && std::holds_alternative<TextPart>(m.parts.front())) {
      msg["content"] = std::get<TextPart>(m.parts.front()).text;
    } else {
      auto content = nlohmann::ordered_json::array();
      for (const auto& p : m.parts) {
        nlohmann::ordered_json part;
        if (const auto* t = std::get_if<TextPart>(&p)) {
          part["type"] = "text";
          part["text"] = t->text;
        } else {
          const auto& img = std::get<ImagePart>(p);
          part["type"] = "image_url";
          part["image_url"] = {{"url", data_url(load(img.frame))}};
        }
        content.push_back(std::move(part));
      }
      msg["content"] = std::move(content);
    }
    messages.push_back(std::move(msg));
  }

  nlohmann::ordered_json body;
  body["model"] = model;
  body["messages"] = std::move(messages);
  body["temperature"] = request.params.temperature;
  if (request.params.max_tokens) body["max_tokens"] = *request.params.max_tokens;
  body["stream"] = false;
  return body;
}

nlohmann::ordered_json text_embedding_body(std::string_view model, std::string_view text) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["input"] = text;
  return body;
}

nlohmann::ordered_json image_embedding_body(std::string_view model, const EncodedImage& image) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["input"] = nlohmann::ordered_json::array({{{"image", data_url(image)}}});
  return body;
}

namespace {

[[noreturn]] void bad_body(std::string_view body, std::string_view why) {
  throw TransportError(ErrorCode::HttpStatus,
                       fmt::format("malformed response ({}): {:.200}", why, body), 200);
}

}  // namespace

Completion parse_chat_response(std::string_view body) {
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) bad_body(body, "not JSON");
  try {
    Completion c;
    const auto& message = doc.at("choices").at(0).at("message");
    const auto& content = message.at("content");
    c.text = content.is_null() ? std::string() : content.get<std::string>();
    if (auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
      c.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
      c.completion_tokens = it->value("completion_tokens", std::int64_t{0});
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    bad_body(body, e.what());
  }
}

Embedding parse_embedding_response(std::string_view body) {
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) bad_body(body, "not JSON");
  try {
    return doc.at("data").at(0).at("embedding").get<Embedding>();
  } catch (const nlohmann::json::exception& e) {
    bad_body(body, e.what());
  }
}

}  // namespace symphony
