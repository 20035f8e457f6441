#include "symphony/subtitles.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

namespace symphony {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

// `HH:MM:SS,mmm` (SRT) or `[HH:]MM:SS.mmm` (WebVTT).
std::optional<Timecode> parse_cue_time(std::string_view s) {
  s = trim(s);
  std::int64_t frac_ms = 0;
  if (auto sep = s.find_first_of(",."); sep != std::string_view::npos) {
    auto frac = s.substr(sep + 1);
    if (frac.empty() || frac.size() > 3) return std::nullopt;
    auto v = parse_int(frac);
    if (!v) return std::nullopt;
    frac_ms = *v;
    for (auto n = frac.size(); n < 3; ++n) frac_ms *= 10;
    s = s.substr(0, sep);
  }
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    auto c = s.find(':', pos);
    fields.push_back(s.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  if (fields.size() < 2 || fields.size() > 3) return std::nullopt;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    auto v = parse_int(fields[i]);
    if (!v) return std::nullopt;
    if (i > 0 && *v >= 60) return std::nullopt;
    total = total * 60 + *v;
  }
  return Timecode(total * 1000 + frac_ms);
}

}  // namespace

SubtitleTrack parse_subtitles_text(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto lines = split_lines(text);
  const bool is_vtt = !lines.empty() && trim(lines.front()).starts_with("WEBVTT");

  SubtitleTrack track;
  bool saw_content = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    saw_content = true;
    const auto arrow = line.find("-->");
    if (arrow == std::string_view::npos) continue;  // index, identifier, header, NOTE

    auto start_text = line.substr(0, arrow);
    auto end_text = trim(line.substr(arrow + 3));
    // WebVTT cue settings follow the end time
    if (auto sp = end_text.find_first_of(" \t"); sp != std::string_view::npos) {
      end_text = end_text.substr(0, sp);
    }
    const auto start = parse_cue_time(start_text);
    const auto end = parse_cue_time(end_text);
    if (!start || !end) {
      throw Error(ErrorCode::MalformedSubtitleFile,
                  fmt::format("line {}: bad cue timing '{}'", i + 1, line));
    }

    const auto cue_line = i + 1;
    std::string body;
    std::size_t j = i + 1;
    for (; j < lines.size() && !trim(lines[j]).empty(); ++j) {
      if (!body.empty()) body += ' ';
      body += trim(lines[j]);
    }
    i = j;

    if (!(*start < *end)) {
      spdlog::warn("subtitle cue at line {} has end <= start; dropped", cue_line);
      continue;
    }
    track.cues.push_back({TimeRange(*start, *end), std::move(body)});
  }

  if (saw_content && track.cues.empty() && !is_vtt) {
    throw Error(ErrorCode::MalformedSubtitleFile, "no subtitle cues found");
  }
  std::stable_sort(track.cues.begin(), track.cues.end(),
                   [](const SubtitleCue& a, const SubtitleCue& b) {
                     return a.range.start < b.range.start;
                   });
  return track;
}

SubtitleTrack parse_subtitles(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::MalformedSubtitleFile,
                fmt::format("cannot open subtitle file '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_subtitles_text(ss.str());
}

std::string render_cues(std::span<const SubtitleCue> cues) {
  std::string out;
  for (const auto& c : cues) {
    if (!out.empty()) out += '\n';
    out += fmt::format("{}: {}", format_range(c.range), c.text);
  }
  return out;
}

std::string render_subtitles(const SubtitleTrack& track) { return render_cues(track.cues); }

}  // namespace symphony
