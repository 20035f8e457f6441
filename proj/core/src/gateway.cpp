#include "symphony/gateway.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <semaphore>
#include <thread>

namespace symphony {

struct ConcurrencyLimiter::Slot {
  explicit Slot(int n) : limit(n), sem(n) {}
  int limit;
  std::counting_semaphore<> sem;
};

ConcurrencyLimiter::ConcurrencyLimiter(const std::map<BackendRole, int>& limits) {
  for (const auto& [role, n] : limits) {
    if (n > 0) slots_.emplace(role, std::make_unique<Slot>(n));
  }
}

ConcurrencyLimiter::~ConcurrencyLimiter() = default;

ConcurrencyLimiter::Permit::~Permit() {
  if (owner_) owner_->release(role_);
}

ConcurrencyLimiter::Permit ConcurrencyLimiter::acquire(BackendRole role) {
  auto it = slots_.find(role);
  if (it == slots_.end()) return {};
  it->second->sem.acquire();
  return Permit(this, role);
}

void ConcurrencyLimiter::release(BackendRole role) { slots_.at(role)->sem.release(); }

std::optional<int> ConcurrencyLimiter::limit(BackendRole role) const {
  auto it = slots_.find(role);
  if (it == slots_.end()) return std::nullopt;
  return it->second->limit;
}

struct ModelGateway::Log {
  mutable std::mutex mu;
  std::vector<ModelExchange> exchanges;
};

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayOptions options)
    : ModelGateway(std::move(backend), options,
                   std::make_shared<ConcurrencyLimiter>(options.max_concurrency)) {}

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayOptions options,
                           std::shared_ptr<ConcurrencyLimiter> limiter)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      limiter_(std::move(limiter)),
      log_(std::make_unique<Log>()) {
  if (!backend_) throw Error(ErrorCode::InvalidArgument, "gateway needs a backend");
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

ModelGateway::ModelGateway(ModelGateway&&) noexcept = default;
ModelGateway& ModelGateway::operator=(ModelGateway&&) noexcept = default;
ModelGateway::~ModelGateway() = default;

ModelGateway ModelGateway::fork() const { return ModelGateway(backend_, options_, limiter_); }

ModelGateway ModelGateway::with_backend(std::shared_ptr<ModelBackend> backend) const {
  return ModelGateway(std::move(backend), options_, limiter_);
}

void ModelGateway::record(ModelExchange ex) {
  std::lock_guard lock(log_->mu);
  log_->exchanges.push_back(std::move(ex));
}

template <typename Fn>
auto ModelGateway::with_retries(BackendRole role, const std::string& channel,
                                const std::vector<ChatMessage>& request, Fn&& call) {
  const int max_attempts = std::max(1, options_.retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    ModelExchange ex;
    ex.backend = role;
    ex.channel = channel;
    ex.request_messages = request;
    ex.attempt = attempt;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto permit = limiter_->acquire(role);
      auto result = call(ex);
      ex.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      record(std::move(ex));
      return result;
    } catch (const TransportError& e) {
      ex.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      ex.error = e.what();
      record(std::move(ex));
      if (!e.retryable() || attempt >= max_attempts) throw;
      const auto& backoff = options_.retry.backoff;
      const auto delay = backoff.empty()
                             ? std::chrono::milliseconds(0)
                             : backoff[std::min<std::size_t>(attempt - 1, backoff.size() - 1)];
      spdlog::warn("{} call on '{}' failed ({}); retry {} in {} ms", role_key(role), channel,
                   e.what(), attempt + 1, delay.count());
      options_.sleep(delay);
    }
  }
}

std::string ModelGateway::chat(BackendRole role, std::string channel,
                               std::vector<ChatMessage> messages,
                               std::optional<DecodeParams> params) {
  if (messages.empty()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("{} chat with no messages", role_key(role)));
  }
  if (role != BackendRole::VLM) {
    for (const auto& m : messages) {
      if (m.has_images()) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("image parts are only accepted by the vlm role, not {}",
                                role_key(role)));
      }
    }
  }
  ChatRequest request{role, std::move(channel), std::move(messages),
                      params.value_or(default_decode_params(role))};
  return with_retries(role, request.channel, request.messages, [&](ModelExchange& ex) {
    auto c = backend_->complete(request);
    ex.response_text = c.text;
    ex.prompt_tokens = c.prompt_tokens;
    ex.completion_tokens = c.completion_tokens;
    return std::move(c.text);
  });
}

std::string ModelGateway::vision_chat(std::string channel, std::string text_prompt,
                                      std::span<const Frame> frames) {
  std::vector<LabeledFrame> labeled;
  labeled.reserve(frames.size());
  for (const auto& f : frames) labeled.push_back({f, {}});
  std::stable_sort(labeled.begin(), labeled.end(), [](const LabeledFrame& a, const LabeledFrame& b) {
    return a.frame.at < b.frame.at;
  });
  return vision_chat(std::move(channel), std::move(text_prompt), std::move(labeled));
}

std::string ModelGateway::vision_chat(std::string channel, std::string text_prompt,
                                      std::vector<LabeledFrame> frames) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "vision_chat needs at least one frame");
  if (static_cast<int>(frames.size()) > options_.frame_cap) {
    throw Error(ErrorCode::FrameLimitExceeded,
                fmt::format("{} frames requested, cap is {}", frames.size(), options_.frame_cap));
  }
  ChatMessage msg;
  msg.role = MessageRole::User;
  msg.parts.push_back(TextPart{std::move(text_prompt)});
  for (auto& f : frames) {
    auto label = f.label.empty() ? fmt::format("Frame at {}", format_timecode(f.frame.at))
                                 : std::move(f.label);
    msg.parts.push_back(TextPart{std::move(label)});
    msg.parts.push_back(ImagePart{std::move(f.frame)});
  }
  std::vector<ChatMessage> messages;
  messages.push_back(std::move(msg));
  return chat(BackendRole::VLM, std::move(channel), std::move(messages));
}

Embedding ModelGateway::embed_text(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "embed_text on empty input");
  std::vector<ChatMessage> record{ChatMessage::user(std::string(text))};
  return with_retries(BackendRole::Embedder, "embed_text", record, [&](ModelExchange&) {
    return backend_->embed_text(text);
  });
}

Embedding ModelGateway::embed_image(const Frame& frame) {
  std::vector<ChatMessage> record{ChatMessage{MessageRole::User, {ImagePart{frame}}}};
  return with_retries(BackendRole::Embedder, "embed_image", record, [&](ModelExchange&) {
    return backend_->embed_image(frame);
  });
}

std::vector<ModelExchange> ModelGateway::exchanges() const {
  std::lock_guard lock(log_->mu);
  return log_->exchanges;
}

std::map<BackendRole, RoleTokens> ModelGateway::token_totals() const {
  std::lock_guard lock(log_->mu);
  std::map<BackendRole, RoleTokens> totals;
  for (const auto& ex : log_->exchanges) {
    auto& t = totals[ex.backend];
    t.prompt_tokens += ex.prompt_tokens;
    t.completion_tokens += ex.completion_tokens;
    t.calls += 1;
  }
  return totals;
}

}  // namespace symphony
