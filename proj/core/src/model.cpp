#include "symphony/model.hpp"

#include <cmath>
#include <numeric>

namespace symphony {

std::string_view role_key(BackendRole role) {
  switch (role) {
    case BackendRole::Planner: return "planner";
    case BackendRole::Reflector: return "reflector";
    case BackendRole::SubtitleLLM: return "subtitle_llm";
    case BackendRole::VLM: return "vlm";
    case BackendRole::Embedder: return "embedder";
  }
  return "planner";
}

std::optional<BackendRole> parse_role(std::string_view key) {
  for (auto r : kAllRoles) {
    if (role_key(r) == key) return r;
  }
  return std::nullopt;
}

std::string_view message_role_key(MessageRole r) {
  switch (r) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

ChatMessage ChatMessage::system(std::string text) {
  return {MessageRole::System, {TextPart{std::move(text)}}};
}
ChatMessage ChatMessage::user(std::string text) {
  return {MessageRole::User, {TextPart{std::move(text)}}};
}
ChatMessage ChatMessage::assistant(std::string text) {
  return {MessageRole::Assistant, {TextPart{std::move(text)}}};
}

bool ChatMessage::has_images() const {
  for (const auto& p : parts) {
    if (std::holds_alternative<ImagePart>(p)) return true;
  }
  return false;
}

std::string ChatMessage::text() const {
  std::string out;
  for (const auto& p : parts) {
    if (const auto* t = std::get_if<TextPart>(&p)) out += t->text;
  }
  return out;
}

DecodeParams default_decode_params(BackendRole role) {
  DecodeParams p;
  p.temperature = role == BackendRole::Planner ? 0.6 : 0.0;
  return p;
}

float cosine_similarity(const Embedding& a, const Embedding& b) {
  const auto n = std::min(a.size(), b.size());
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0f;
  return static_cast<float>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

void normalize(Embedding& v) {
  double sq = 0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq == 0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

}  // namespace symphony
