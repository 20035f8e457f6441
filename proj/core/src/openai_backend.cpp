#include "symphony/openai_backend.hpp"

#include "symphony/error.hpp"
#include "symphony/frame_loader.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include <cstdlib>

namespace symphony {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigError, fmt::format("endpoint_url '{}' lacks a scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

}  // namespace

OpenAiBackend::OpenAiBackend(std::map<BackendRole, EndpointConfig> endpoints,
                             FrameBytesLoader loader)
    : endpoints_(std::move(endpoints)), loader_(std::move(loader)) {
  if (!loader_) loader_ = [](const Frame& f) { return load_frame_capped(f); };
}

const EndpointConfig& OpenAiBackend::endpoint(BackendRole role) const {
  auto it = endpoints_.find(role);
  if (it == endpoints_.end()) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("no endpoint configured for role '{}'", role_key(role)));
  }
  return it->second;
}

std::string OpenAiBackend::post(const EndpointConfig& ep, std::string_view path,
                                const std::string& body) {
  const auto url = split_url(ep.endpoint_url);
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(ep.timeout_s);
  const auto usecs = static_cast<time_t>((ep.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!ep.api_key_env.empty()) {
    if (const char* key = std::getenv(ep.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", fmt::format("Bearer {}", key));
    }
  }
  auto res = client.Post(url.prefix + std::string(path), headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const auto what = httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::Write ||
        err == httplib::Error::ConnectionTimeout) {
      throw TransportError(ErrorCode::Timeout, fmt::format("{}: {}", ep.endpoint_url, what));
    }
    throw TransportError(ErrorCode::Connection, fmt::format("{}: {}", ep.endpoint_url, what));
  }
  if (res->status == 429) {
    throw TransportError(ErrorCode::RateLimited, fmt::format("{}: rate limited", ep.endpoint_url),
                         429);
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(ErrorCode::HttpStatus,
                         fmt::format("{}: HTTP {}: {:.300}", ep.endpoint_url, res->status, res->body),
                         res->status);
  }
  return res->body;
}

Completion OpenAiBackend::complete(const ChatRequest& request) {
  const auto& ep = endpoint(request.role);
  const auto body = chat_request_body(ep.model_name, request, loader_).dump();
  return parse_chat_response(post(ep, "/chat/completions", body));
}

Embedding OpenAiBackend::embed_text(std::string_view text) {
  const auto& ep = endpoint(BackendRole::Embedder);
  return parse_embedding_response(post(ep, "/embeddings", text_embedding_body(ep.model_name, text).dump()));
}

Embedding OpenAiBackend::embed_image(const Frame& frame) {
  const auto& ep = endpoint(BackendRole::Embedder);
  const auto body = image_embedding_body(ep.model_name, loader_(frame)).dump();
  return parse_embedding_response(post(ep, "/embeddings", body));
}

}  // namespace symphony
