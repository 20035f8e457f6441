#pragma once

#include "symphony/error.hpp"
#include "symphony/gateway.hpp"
#include "symphony/media.hpp"
#include "symphony/subtitles.hpp"
#include "symphony/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace symphony {

inline constexpr int kEpisodeLogSchemaVersion = 1;

struct ReflectionVerdict {
  bool credible = false;
  std::optional<std::string> comment;  // empty exactly when credible
};

struct EpisodeOutcome {
  Answer answer;
  int attempts_used = 0;
  int steps_used = 0;
  std::vector<ReflectionVerdict> verdicts;
  std::map<BackendRole, RoleTokens> tokens;
  /// Deterministic record of the episode (no timings), suitable for replay diffs.
  nlohmann::ordered_json log;
};

/// Thrown by run_episode when a planner, reflector or answer call cannot be
/// completed. Carries the log of everything done up to that point.
class EpisodeAbortedError : public Error {
 public:
  EpisodeAbortedError(const std::string& message, nlohmann::ordered_json partial_log)
      : Error(ErrorCode::EpisodeAborted, message), log_(std::move(partial_log)) {}
  const nlohmann::ordered_json& partial_log() const { return log_; }

 private:
  nlohmann::ordered_json log_;
};

/// What one planner decision cost and produced.
struct PlanStep {
  AgentAction action;
  int model_calls = 0;
  std::optional<std::string> fault;  // set when an unknown agent was coerced to finish
};

/// The history block shown to the planner and reflector: steps in order,
/// each critique placed after the step count at which it was issued.
std::string render_history(const Trajectory& trajectory);

/// Parses a reflector reply. Unparseable replies yield a non-credible
/// verdict with the comment "reflection output unparseable".
ReflectionVerdict parse_verdict(std::string_view reply);

/// Option label named by a reply, if any. Tries, in order: the whole reply
/// as a bare label, "answer/option/choice is X", a bracketed label, then a
/// single isolated uppercase token that is a valid label.
std::optional<std::string> extract_choice_label(std::string_view reply, const Question& question);

inline constexpr std::string_view kNoProposedAnswer =
    "(no answer was proposed within the step budget)";
inline constexpr std::string_view kUnparseableVerdict = "reflection output unparseable";

/// Plans, dispatches to the specialist agents, reflects on the result and
/// retries with the critique until a verdict is credible or the reflection
/// budget runs out.
class Orchestrator {
 public:
  Orchestrator(ModelGateway& gateway, Budgets budgets);

  EpisodeOutcome run_episode(const Question& question, const FrameManifest& video,
                             const SubtitleTrack* subtitles);

  /// One planner decision. `max_calls` bounds model calls including the
  /// corrective reprompt. Throws PlanningParseFailure when no reply holds JSON.
  PlanStep plan_step(const EpisodeState& state, int max_calls = 2);

  /// Runs the specialist and appends (action, observation) to the
  /// trajectory. Specialist failures become error-text observations.
  Observation dispatch_action(const AgentAction& action, EpisodeState& state, int attempt = 1);

  ReflectionVerdict reflect(const EpisodeState& state, const std::string& proposed_answer);

  /// Final planner call. Multiple-choice replies must name an option label;
  /// one reprompt lists the valid labels, then a case-insensitive prefix
  /// match is tried. Throws AnswerExtractionFailure.
  Answer finalize_answer(const EpisodeState& state);

 private:
  ModelGateway& gateway_;
  Budgets budgets_;
};

}  // namespace symphony
