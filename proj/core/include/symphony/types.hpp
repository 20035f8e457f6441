#pragma once

#include "symphony/timecode.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace symphony {

class FrameManifest;
struct SubtitleTrack;

struct Option {
  std::string label;
  std::string text;
};

struct Question {
  std::string question_id;
  std::string text;
  std::vector<Option> options;  // empty for open-ended questions
  std::optional<std::string> category;

  /// Throws InvalidArgument on empty text or duplicate option labels.
  void validate() const;
  bool is_multiple_choice() const { return !options.empty(); }
  bool has_label(std::string_view label) const;
  /// Question text followed by one `(L) text` line per option.
  std::string render() const;
};

enum class AgentKind { Grounding, VisualPerception, Subtitle, Terminate };

/// Name the planner uses for each agent ("Grounding Agent", ..., "finish").
std::string_view agent_name(AgentKind kind);
/// Lenient inverse of agent_name: case-insensitive, tolerates a missing
/// " Agent" suffix and the usual synonyms for finishing.
std::optional<AgentKind> parse_agent_name(std::string_view name);

struct AgentAction {
  AgentKind kind = AgentKind::Terminate;
  std::string instruct;
  std::string reason;

  void validate() const;
};

struct Observation {
  AgentKind source = AgentKind::Terminate;
  std::string text;
  nlohmann::json artifacts;  // null when the agent produced no structured payload
  bool truncated = false;
};

inline constexpr std::string_view kTruncationMarker = "[truncated]";

/// Builds an observation whose text fits in `budget` characters. Longer text
/// loses its tail and ends with kTruncationMarker.
Observation make_observation(AgentKind source, std::string text, std::size_t budget,
                             nlohmann::json artifacts = nullptr);

/// Clips `text` to at most `budget` bytes on a UTF-8 boundary, appending the
/// marker when anything was removed.
std::string clip_text(std::string text, std::size_t budget, bool* clipped = nullptr);

struct Critique {
  std::string comment;
  int attempt_index = 1;   // attempt that was judged
  std::size_t after_step = 0;  // number of steps recorded when it was issued
};

struct TrajectoryStep {
  int attempt = 1;
  AgentAction action;
  Observation observation;
};

/// Append-only record of what the agents did. Entries cannot be edited or
/// removed once added.
class Trajectory {
 public:
  void append(TrajectoryStep step) { steps_.push_back(std::move(step)); }
  void add_critique(Critique c) { critiques_.push_back(std::move(c)); }

  std::span<const TrajectoryStep> steps() const { return steps_; }
  std::span<const Critique> critiques() const { return critiques_; }
  bool empty() const { return steps_.empty() && critiques_.empty(); }

 private:
  std::vector<TrajectoryStep> steps_;
  std::vector<Critique> critiques_;
};

struct EpisodeState {
  Question question;
  Trajectory trajectory;
  const FrameManifest* video = nullptr;
  const SubtitleTrack* subtitles = nullptr;  // may be null: no subtitles
};

struct Answer {
  std::optional<std::string> choice_label;
  std::string free_text;
  std::optional<std::string> confidence_note;
  std::string trajectory_ref;
};

struct Budgets {
  int inner_rounds = 15;
  int tool_calls_per_agent = 15;
  int reflection_rounds = 3;
  int frame_cap = 40;
  int segment_duration_s = 60;
  int frames_per_segment = 30;
  int scoring_concurrency = 20;
  int clip_window_s = 10;
  int clip_top_k = 15;
  int score_keep_min = 2;
  int observation_chars = 8000;

  /// Throws InvalidArgument when any field breaks its constraints.
  void validate() const;
  /// Segment-scoring sample rate; 0.5 fps with the defaults.
  double scoring_fps() const {
    return static_cast<double>(frames_per_segment) / segment_duration_s;
  }
};

void to_json(nlohmann::json& j, const Budgets& b);
/// Overlays any keys present in `j` onto `b`.
void merge_budgets(const nlohmann::json& j, Budgets& b);

}  // namespace symphony
