#pragma once

#include "symphony/timecode.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace symphony {

struct SubtitleCue {
  TimeRange range;
  std::string text;  // multi-line cue text joined with single spaces
};

struct SubtitleTrack {
  std::vector<SubtitleCue> cues;  // ordered by start; overlaps are kept as-is

  bool empty() const { return cues.empty(); }
};

/// Parses SRT or WebVTT (detected from the `WEBVTT` signature). Cues with
/// end <= start are dropped with a warning; any unparseable timing line
/// throws MalformedSubtitleFile.
SubtitleTrack parse_subtitles_text(std::string_view text);
SubtitleTrack parse_subtitles(const std::filesystem::path& path);

/// One `[HH:MM:SS - HH:MM:SS]: text` line per cue, newline separated.
std::string render_subtitles(const SubtitleTrack& track);
std::string render_cues(std::span<const SubtitleCue> cues);

}  // namespace symphony
