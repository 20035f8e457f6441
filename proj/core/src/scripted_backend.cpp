#include "symphony/scripted_backend.hpp"

#include <fmt/format.h>

#include <cctype>
#include <fstream>
#include <random>
#include <thread>

namespace symphony {

ScriptedReply ScriptedReply::from_json(const nlohmann::json& j) {
  ScriptedReply r;
  if (j.is_string()) {
    r.text = j.get<std::string>();
    return r;
  }
  if (j.is_object() && j.contains("$error")) {
    const auto kind = j.at("$error").get<std::string>();
    if (kind == "timeout") {
      r.error = ErrorCode::Timeout;
    } else if (kind == "rate_limited") {
      r.error = ErrorCode::RateLimited;
      r.http_status = 429;
    } else if (kind == "connection") {
      r.error = ErrorCode::Connection;
    } else if (kind == "http") {
      r.error = ErrorCode::HttpStatus;
      r.http_status = j.value("status", 500);
    } else {
      throw Error(ErrorCode::ConfigError, fmt::format("unknown scripted error '{}'", kind));
    }
    return r;
  }
  r.text = j.dump();
  return r;
}

Script Script::from_json(const nlohmann::json& j) {
  Script s;
  try {
    if (auto it = j.find("sequences"); it != j.end()) {
      for (const auto& [key, list] : it->items()) {
        auto& seq = s.sequences[key];
        for (const auto& entry : list) seq.push_back(ScriptedReply::from_json(entry));
      }
    }
    if (auto it = j.find("rules"); it != j.end()) {
      for (const auto& rule : *it) {
        ScriptRule r;
        r.key = rule.at("key").get<std::string>();
        const auto& c = rule.at("contains");
        if (c.is_string()) {
          r.contains.push_back(c.get<std::string>());
        } else {
          r.contains = c.get<std::vector<std::string>>();
        }
        r.reply = ScriptedReply::from_json(rule.at("reply"));
        s.rules.push_back(std::move(r));
      }
    }
    if (auto it = j.find("fallbacks"); it != j.end()) {
      for (const auto& [key, reply] : it->items()) {
        s.fallbacks[key] = ScriptedReply::from_json(reply);
      }
    }
    if (auto it = j.find("embedder"); it != j.end()) {
      s.embed_dimension = it->value("dimension", 64);
      if (auto tags = it->find("frame_tags"); tags != it->end()) {
        for (const auto& [ms, tag] : tags->items()) {
          s.frame_tags[std::stoll(ms)] = tag.get<std::string>();
        }
      }
    }
    s.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, fmt::format("bad backend script: {}", e.what()));
  }
  return s;
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

ScriptedBackend::ScriptedBackend(Script script) : script_(std::move(script)) {}

namespace {

std::string request_text(const ChatRequest& request) {
  std::string out;
  for (const auto& m : request.messages) {
    out += m.text();
    out += '\n';
  }
  return out;
}

}  // namespace

ScriptedReply ScriptedBackend::resolve(const ChatRequest& request) {
  const std::string role(role_key(request.role));
  const auto text = request_text(request);
  std::lock_guard lock(mu_);
  channel_calls_[request.channel] += 1;
  role_calls_[request.role] += 1;

  for (const auto& rule : script_.rules) {
    if (rule.key != request.channel && rule.key != role) continue;
    bool all = true;
    for (const auto& needle : rule.contains) {
      if (text.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return rule.reply;
  }
  for (const auto& key : {request.channel, role}) {
    auto it = script_.sequences.find(key);
    if (it == script_.sequences.end()) continue;
    auto& cursor = cursor_[key];
    if (cursor < it->second.size()) return it->second[cursor++];
  }
  for (const auto& key : {request.channel, role}) {
    if (auto it = script_.fallbacks.find(key); it != script_.fallbacks.end()) return it->second;
  }
  throw Error(ErrorCode::ScriptExhausted,
              fmt::format("no scripted reply for call {} on channel '{}' (role {})",
                          channel_calls_[request.channel], request.channel, role));
}

void ScriptedBackend::enter(BackendRole role) {
  std::lock_guard lock(mu_);
  auto& n = in_flight_[role];
  ++n;
  if (n > peak_[role]) peak_[role] = n;
}

void ScriptedBackend::leave(BackendRole role) {
  std::lock_guard lock(mu_);
  --in_flight_[role];
}

Completion ScriptedBackend::complete(const ChatRequest& request) {
  enter(request.role);
  struct Exit {
    ScriptedBackend* self;
    BackendRole role;
    ~Exit() { self->leave(role); }
  } exit_guard{this, request.role};

  if (script_.latency.count() > 0) std::this_thread::sleep_for(script_.latency);
  const auto reply = resolve(request);
  if (reply.error) {
    throw TransportError(*reply.error,
                         fmt::format("scripted {} on channel '{}'", to_string(*reply.error),
                                     request.channel),
                         reply.http_status);
  }
  Completion c;
  c.text = reply.text;
  for (const auto& m : request.messages) {
    for (const auto& p : m.parts) {
      if (const auto* t = std::get_if<TextPart>(&p)) {
        c.prompt_tokens += estimate_tokens(t->text);
      } else {
        c.prompt_tokens += 85;
      }
    }
  }
  c.completion_tokens = estimate_tokens(c.text);
  return c;
}

Embedding ScriptedBackend::embed_tokens(std::string_view text) const {
  const auto dim = static_cast<std::size_t>(script_.embed_dimension);
  Embedding v(dim, 0.0f);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    // FNV-1a seeds a fixed generator, so every token owns a stable direction.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ull;
    }
    std::mt19937_64 gen(h);
    for (std::size_t i = 0; i < dim; ++i) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      v[i] += static_cast<float>(2.0 * u - 1.0);
    }
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '@' || c == '_') {
      token += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  normalize(v);
  return v;
}

Embedding ScriptedBackend::embed_text(std::string_view text) {
  {
    std::lock_guard lock(mu_);
    role_calls_[BackendRole::Embedder] += 1;
    channel_calls_["embed_text"] += 1;
  }
  return embed_tokens(text);
}

Embedding ScriptedBackend::embed_image(const Frame& frame) {
  {
    std::lock_guard lock(mu_);
    role_calls_[BackendRole::Embedder] += 1;
    channel_calls_["embed_image"] += 1;
  }
  if (auto it = script_.frame_tags.find(frame.at.millis()); it != script_.frame_tags.end()) {
    return embed_tokens(it->second);
  }
  return embed_tokens(fmt::format("frame@{}", frame.at.millis()));
}

std::int64_t ScriptedBackend::calls(BackendRole role) const {
  std::lock_guard lock(mu_);
  auto it = role_calls_.find(role);
  return it == role_calls_.end() ? 0 : it->second;
}

std::int64_t ScriptedBackend::calls(std::string_view channel) const {
  std::lock_guard lock(mu_);
  auto it = channel_calls_.find(channel);
  return it == channel_calls_.end() ? 0 : it->second;
}

int ScriptedBackend::peak_in_flight(BackendRole role) const {
  std::lock_guard lock(mu_);
  auto it = peak_.find(role);
  return it == peak_.end() ? 0 : it->second;
}

ScriptBook::ScriptBook(nlohmann::json doc) : doc_(std::move(doc)) {
  if (!doc_.is_object()) throw Error(ErrorCode::ConfigError, "backend script must be a JSON object");
  if (doc_.value("schema_version", 1) != 1) {
    throw Error(ErrorCode::ConfigError, "unsupported backend script schema_version");
  }
}

ScriptBook ScriptBook::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, fmt::format("cannot open script '{}'", path.string()));
  auto doc = nlohmann::json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::ConfigError, fmt::format("script '{}' is not valid JSON", path.string()));
  }
  return ScriptBook(std::move(doc));
}

Script ScriptBook::select(const std::string& question_id, int instance) const {
  const nlohmann::json* node = &doc_;
  if (auto by = doc_.find("by_question"); by != doc_.end()) {
    if (auto q = by->find(question_id); q != by->end()) node = &*q;
  }
  if (auto inst = node->find("instances"); inst != node->end() && inst->is_array() && !inst->empty()) {
    node = &(*inst)[static_cast<std::size_t>(instance) % inst->size()];
  }
  return Script::from_json(*node);
}

}  // namespace symphony
