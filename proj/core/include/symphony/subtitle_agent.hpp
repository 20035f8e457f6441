#pragma once

#include "symphony/gateway.hpp"
#include "symphony/subtitles.hpp"
#include "symphony/types.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace symphony {

struct SubtitleAnalysis {
  std::string relevant_subtitle_info;  // `[HH:MM:SS - HH:MM:SS]: text` lines
  std::string key_entities_and_sentiment;
  std::string overall_topic;

  /// The three fields as the labeled text block handed to the planner.
  std::string render() const;
};

nlohmann::json to_json(const SubtitleAnalysis& a);

/// Rendered tracks longer than this are analyzed in halves and merged.
inline constexpr std::size_t kSubtitleSplitChars = 60'000;

struct SubtitleAgentOptions {
  std::size_t split_chars = kSubtitleSplitChars;
  std::size_t relevant_info_chars = 8000;
  /// When set, echoed timestamps past this point are reported as invalid.
  std::optional<Timecode> video_duration;
};

/// Lines of relevant_subtitle_info that are not a well-formed
/// `[HH:MM:SS - HH:MM:SS]: text` entry within the video.
std::vector<std::string> invalid_subtitle_lines(const std::string& relevant,
                                                std::optional<Timecode> duration);

/// Question-focused reading of the whole subtitle track by a text model. An
/// empty track is answered locally without a model call.
/// Throws SubtitleParseFailure when the model twice fails to return JSON.
SubtitleAnalysis analyze_subtitles(ModelGateway& gateway, const Question& question,
                                   const SubtitleTrack& track,
                                   const SubtitleAgentOptions& options = {});

}  // namespace symphony
