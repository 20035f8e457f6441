#pragma once

#include "symphony/timecode.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace symphony {

/// One pre-extracted frame: where it sits in the video and where it lives on disk.
struct Frame {
  Timecode at;
  std::filesystem::path path;

  bool operator==(const Frame& o) const { return at == o.at; }
};

/// Index of the pre-extracted frames of one video. This is the engine's only
/// view of the video; nothing here decodes media.
class FrameManifest {
 public:
  /// Validates: non-empty, strictly increasing timestamps, all <= duration.
  FrameManifest(std::string video_id, Timecode duration, std::vector<Frame> frames,
                std::optional<double> source_fps = std::nullopt);

  const std::string& video_id() const { return video_id_; }
  Timecode duration() const { return duration_; }
  std::span<const Frame> frames() const { return frames_; }
  std::optional<double> source_fps() const { return source_fps_; }
  TimeRange full_range() const { return TimeRange(Timecode(0), duration_); }

  /// Frames with timestamps in [r.start, r.end).
  std::span<const Frame> frames_in(const TimeRange& r) const;

 private:
  std::string video_id_;
  Timecode duration_;
  std::vector<Frame> frames_;
  std::optional<double> source_fps_;
};

/// Reads `<dir>/manifest.json`. When the manifest has no `frames` array the
/// directory is scanned for `<millis>.jpg` files instead.
FrameManifest load_manifest(const std::filesystem::path& dir);

/// Remainders shorter than this are folded into the preceding range.
inline constexpr std::int64_t kMinTailMillis = 5000;

/// Tiles [0, duration) into consecutive `segment_s`-second ranges. The last
/// range absorbs a remainder shorter than kMinTailMillis when it has a
/// predecessor to merge into.
std::vector<TimeRange> partition_segments(Timecode duration, int segment_s);

/// Same tiling as partition_segments, used for the short retrieval windows.
std::vector<TimeRange> clip_windows(Timecode duration, int window_s);

/// Nearest indexed frame to each of n midpoint targets start + (i + 0.5) * len / n,
/// restricted to frames inside `range`. Ties go to the earlier frame;
/// duplicates collapse, so the result may be shorter than n.
std::vector<Frame> sample_uniform(const TimeRange& range, int n, const FrameManifest& manifest);

/// Target timestamps start, start + 1/fps, ... strictly below range.end,
/// in (fractional) milliseconds. Size is ceil(len_seconds * fps).
std::vector<double> fps_targets(const TimeRange& range, double fps);

/// Nearest in-range frame per fps target, deduplicated, then thinned to at
/// most `cap` frames with thin_uniform.
std::vector<Frame> sample_fps(const TimeRange& range, double fps, int cap,
                              const FrameManifest& manifest);

/// Picks `cap` of `frames` at indices round(j * (m - 1) / (cap - 1)).
/// Returns the input unchanged when it already fits.
std::vector<Frame> thin_uniform(std::vector<Frame> frames, int cap);

}  // namespace symphony
