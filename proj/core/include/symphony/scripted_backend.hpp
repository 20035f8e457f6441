#pragma once

#include "symphony/error.hpp"
#include "symphony/model.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace symphony {

/// A canned reply: text, or a transport failure to raise instead.
struct ScriptedReply {
  std::string text;
  std::optional<ErrorCode> error;
  int http_status = 0;

  static ScriptedReply from_json(const nlohmann::json& j);
};

/// Matches any call on `key` (a channel or a role key) whose request text
/// contains every string in `contains`.
struct ScriptRule {
  std::string key;
  std::vector<std::string> contains;
  ScriptedReply reply;
};

/// Canned responses for one episode. A call on channel C of role R resolves,
/// in order, to: the first matching rule; the next unused entry of
/// sequences[C], then sequences[R]; fallbacks[C], then fallbacks[R].
/// Anything else raises ScriptExhausted.
///
/// JSON form (`--backend-script`):
///
///     {
///       "schema_version": 1,
///       "latency_ms": 0,
///       "sequences": {"planner": ["...", {"reason": "...", "agent": "...", "instruct": "..."}]},
///       "rules": [{"key": "vlm_scoring", "contains": ["Frame at 00:04:00"], "reply": "..."}],
///       "fallbacks": {"vlm_scoring": "..."},
///       "embedder": {"dimension": 64, "frame_tags": {"40000": "red ball"}}
///     }
///
/// A reply is a string, a JSON object (sent as its compact dump), or
/// `{"$error": "timeout" | "rate_limited" | "connection" | "http", "status": 503}`.
struct Script {
  std::map<std::string, std::vector<ScriptedReply>> sequences;
  std::vector<ScriptRule> rules;
  std::map<std::string, ScriptedReply> fallbacks;
  int embed_dimension = 64;
  std::map<std::int64_t, std::string> frame_tags;  // frame millis -> tag text
  std::chrono::milliseconds latency{0};

  static Script from_json(const nlohmann::json& j);
};

/// Deterministic backend replaying a Script. Also counts calls and tracks the
/// peak number of simultaneous in-flight calls per role, which is how tests
/// observe the gateway's concurrency bound.
///
/// Embeddings are bag-of-token vectors: every lowercase alphanumeric token
/// hashes to a fixed pseudo-random direction, and a text embeds as the
/// normalized sum of its tokens. An image embeds as the text of its frame tag,
/// or as a per-frame private token when untagged.
class ScriptedBackend : public ModelBackend {
 public:
  explicit ScriptedBackend(Script script);

  Completion complete(const ChatRequest& request) override;
  Embedding embed_text(std::string_view text) override;
  Embedding embed_image(const Frame& frame) override;

  std::int64_t calls(BackendRole role) const;
  std::int64_t calls(std::string_view channel) const;
  int peak_in_flight(BackendRole role) const;

 private:
  ScriptedReply resolve(const ChatRequest& request);
  void enter(BackendRole role);
  void leave(BackendRole role);
  Embedding embed_tokens(std::string_view text) const;

  Script script_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> cursor_;
  std::map<std::string, std::int64_t, std::less<>> channel_calls_;
  std::map<BackendRole, std::int64_t> role_calls_;
  std::map<BackendRole, int> in_flight_;
  std::map<BackendRole, int> peak_;
};

/// A script file possibly holding per-question and per-instance variants:
///
///     { ...Script fields...,
///       "instances": [ {...Script...}, ... ],          // voting instance i uses [i % n]
///       "by_question": {"q1": { ...same shape... }} }
///
/// select() resolves the variant for one episode; every episode gets a
/// fresh backend so sequence cursors never leak between episodes.
class ScriptBook {
 public:
  explicit ScriptBook(nlohmann::json doc);
  static ScriptBook load(const std::filesystem::path& path);

  Script select(const std::string& question_id, int instance) const;

 private:
  nlohmann::json doc_;
};

/// Rough token estimate used by the scripted backend: ceil(chars / 4), plus
/// 85 per image part.
std::int64_t estimate_tokens(std::string_view text);

}  // namespace symphony
