#pragma once

#include "symphony/media.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace symphony {

enum class BackendRole { Planner, Reflector, SubtitleLLM, VLM, Embedder };

inline constexpr BackendRole kAllRoles[] = {BackendRole::Planner, BackendRole::Reflector,
                                            BackendRole::SubtitleLLM, BackendRole::VLM,
                                            BackendRole::Embedder};

/// Config/log key for a role: "planner", "reflector", "subtitle_llm", "vlm", "embedder".
std::string_view role_key(BackendRole role);
std::optional<BackendRole> parse_role(std::string_view key);

struct TextPart {
  std::string text;
};

/// Reference to a frame on disk; bytes are loaded only when a wire request
/// is serialized.
struct ImagePart {
  Frame frame;
};

using Part = std::variant<TextPart, ImagePart>;

enum class MessageRole { System, User, Assistant };
std::string_view message_role_key(MessageRole r);

struct ChatMessage {
  MessageRole role = MessageRole::User;
  std::vector<Part> parts;

  static ChatMessage system(std::string text);
  static ChatMessage user(std::string text);
  static ChatMessage assistant(std::string text);

  bool has_images() const;
  /// Concatenation of the text parts.
  std::string text() const;
};

struct DecodeParams {
  double temperature = 0.0;
  std::optional<int> max_tokens;
};

/// Temperature 0.6 for planning, 0 everywhere else.
DecodeParams default_decode_params(BackendRole role);

/// Everything a backend needs to answer one chat call. `channel` names the
/// caller (for example "planner" or "vlm_scoring"); scripted backends key
/// their canned responses by it.
struct ChatRequest {
  BackendRole role = BackendRole::Planner;
  std::string channel;
  std::vector<ChatMessage> messages;
  DecodeParams params;
};

struct Completion {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

using Embedding = std::vector<float>;

/// A model provider. Implementations throw TransportError on failure and
/// must tolerate concurrent calls.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual Completion complete(const ChatRequest& request) = 0;
  virtual Embedding embed_text(std::string_view text) = 0;
  virtual Embedding embed_image(const Frame& frame) = 0;
};

/// One attempt at one backend call, successful or not.
struct ModelExchange {
  BackendRole backend = BackendRole::Planner;
  std::string channel;
  std::vector<ChatMessage> request_messages;
  std::string response_text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t latency_ms = 0;
  int attempt = 1;
  std::optional<std::string> error;
};

struct RoleTokens {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t calls = 0;

  std::int64_t total() const { return prompt_tokens + completion_tokens; }
};

float cosine_similarity(const Embedding& a, const Embedding& b);
void normalize(Embedding& v);

}  // namespace symphony
