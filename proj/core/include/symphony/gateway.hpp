#pragma once

#include "symphony/model.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace symphony {

struct RetryPolicy {
  int max_attempts = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(4)};
};

/// Caps simultaneous in-flight calls per backend role. Roles without a
/// configured limit are unbounded. Shared by every gateway forked from the
/// same root so the limit holds across concurrent episodes.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(const std::map<BackendRole, int>& limits);
  ~ConcurrencyLimiter();

  class Permit {
   public:
    Permit() = default;
    Permit(Permit&& o) noexcept : owner_(std::exchange(o.owner_, nullptr)), role_(o.role_) {}
    Permit& operator=(Permit&&) = delete;
    ~Permit();

   private:
    friend class ConcurrencyLimiter;
    Permit(ConcurrencyLimiter* owner, BackendRole role) : owner_(owner), role_(role) {}
    ConcurrencyLimiter* owner_ = nullptr;
    BackendRole role_ = BackendRole::Planner;
  };

  Permit acquire(BackendRole role);
  std::optional<int> limit(BackendRole role) const;

 private:
  struct Slot;
  void release(BackendRole role);
  std::map<BackendRole, std::unique_ptr<Slot>> slots_;
};

struct GatewayOptions {
  RetryPolicy retry;
  std::map<BackendRole, int> max_concurrency{{BackendRole::VLM, 20}};
  int frame_cap = 40;
  /// Used between retry attempts; tests swap in a no-op.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// A frame plus the caption placed in front of it in a vision request.
struct LabeledFrame {
  Frame frame;
  std::string label;
};

/// Single entry point for every model call. Adds request validation,
/// retries, the per-role concurrency cap and an exchange log used for token
/// accounting.
class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayOptions options = {});
  ModelGateway(ModelGateway&&) noexcept;
  ModelGateway& operator=(ModelGateway&&) noexcept;
  ~ModelGateway();

  /// A gateway over the same backend and limiter with an empty exchange log.
  ModelGateway fork() const;
  /// Same limiter and options, different backend.
  ModelGateway with_backend(std::shared_ptr<ModelBackend> backend) const;

  std::string chat(BackendRole role, std::string channel, std::vector<ChatMessage> messages,
                   std::optional<DecodeParams> params = std::nullopt);

  /// Text prompt followed by each frame in timestamp order, every frame
  /// preceded by a text part reading "Frame at HH:MM:SS".
  std::string vision_chat(std::string channel, std::string text_prompt,
                          std::span<const Frame> frames);
  /// Same, but frames keep the caller's order and an empty label falls back
  /// to "Frame at HH:MM:SS".
  std::string vision_chat(std::string channel, std::string text_prompt,
                          std::vector<LabeledFrame> frames);

  Embedding embed_text(std::string_view text);
  Embedding embed_image(const Frame& frame);

  std::vector<ModelExchange> exchanges() const;
  std::map<BackendRole, RoleTokens> token_totals() const;
  int frame_cap() const { return options_.frame_cap; }
  ModelBackend& backend() { return *backend_; }

 private:
  ModelGateway(std::shared_ptr<ModelBackend> backend, GatewayOptions options,
               std::shared_ptr<ConcurrencyLimiter> limiter);

  template <typename Fn>
  auto with_retries(BackendRole role, const std::string& channel,
                    const std::vector<ChatMessage>& record, Fn&& call);
  void record(ModelExchange ex);

  std::shared_ptr<ModelBackend> backend_;
  GatewayOptions options_;
  std::shared_ptr<ConcurrencyLimiter> limiter_;
  struct Log;
  std::unique_ptr<Log> log_;
};

}  // namespace symphony
