#include "symphony/media.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace symphony {

namespace fs = std::filesystem;

FrameManifest::FrameManifest(std::string video_id, Timecode duration, std::vector<Frame> frames,
                             std::optional<double> source_fps)
    : video_id_(std::move(video_id)),
      duration_(duration),
      frames_(std::move(frames)),
      source_fps_(source_fps) {
  if (frames_.empty()) {
    throw Error(ErrorCode::EmptyFrameSet, fmt::format("video '{}' has no frames", video_id_));
  }
  if (duration_.millis() <= 0) {
    throw Error(ErrorCode::MalformedManifest,
                fmt::format("video '{}' has non-positive duration", video_id_));
  }
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    if (frames_[i].at > duration_) {
      throw Error(ErrorCode::TimestampBeyondDuration,
                  fmt::format("frame at {} ms lies beyond duration {} ms", frames_[i].at.millis(),
                              duration_.millis()));
    }
    if (i > 0 && !(frames_[i - 1].at < frames_[i].at)) {
      throw Error(ErrorCode::MalformedManifest,
                  fmt::format("frame timestamps not strictly increasing at {} ms",
                              frames_[i].at.millis()));
    }
  }
}

std::span<const Frame> FrameManifest::frames_in(const TimeRange& r) const {
  auto by_time = [](const Frame& f, Timecode t) { return f.at < t; };
  auto lo = std::lower_bound(frames_.begin(), frames_.end(), r.start, by_time);
  auto hi = std::lower_bound(lo, frames_.end(), r.end, by_time);
  return {lo, hi};
}

namespace {

std::optional<std::int64_t> millis_from_filename(const fs::path& p) {
  const auto stem = p.stem().string();
  if (stem.empty() || p.extension() != ".jpg") return std::nullopt;
  for (char c : stem) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  }
  return std::stoll(stem);
}

std::vector<Frame> scan_frames(const fs::path& dir) {
  std::vector<Frame> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (auto ms = millis_from_filename(entry.path())) {
      frames.push_back({Timecode(*ms), entry.path()});
    }
  }
  std::sort(frames.begin(), frames.end(),
            [](const Frame& a, const Frame& b) { return a.at < b.at; });
  return frames;
}

}  // namespace

FrameManifest load_manifest(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::MissingManifest, fmt::format("'{}' is not a directory", dir.string()));
  }
  const auto manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    if (scan_frames(dir).empty()) {
      throw Error(ErrorCode::EmptyFrameSet, fmt::format("'{}' holds no frames", dir.string()));
    }
    throw Error(ErrorCode::MissingManifest,
                fmt::format("no manifest.json in '{}'", dir.string()));
  }

  nlohmann::json doc;
  try {
    std::ifstream in(manifest_path);
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedManifest,
                fmt::format("{}: {}", manifest_path.string(), e.what()));
  }

  try {
    const auto video_id = doc.value("video_id", dir.filename().string());
    const auto duration = Timecode(doc.at("duration_ms").get<std::int64_t>());
    std::optional<double> fps;
    if (auto it = doc.find("source_fps"); it != doc.end() && it->is_number()) {
      fps = it->get<double>();
    }

    std::vector<Frame> frames;
    if (auto it = doc.find("frames"); it != doc.end()) {
      for (const auto& f : *it) {
        frames.push_back({Timecode(f.at("ms").get<std::int64_t>()),
                          dir / f.at("file").get<std::string>()});
      }
      std::stable_sort(frames.begin(), frames.end(),
                       [](const Frame& a, const Frame& b) { return a.at < b.at; });
    } else {
      frames = scan_frames(dir);
    }
    return FrameManifest(video_id, duration, std::move(frames), fps);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedManifest,
                fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
}

std::vector<TimeRange> partition_segments(Timecode duration, int segment_s) {
  if (duration.millis() <= 0 || segment_s <= 0) {
    throw Error(ErrorCode::InvalidArgument, "partition needs positive duration and segment length");
  }
  const std::int64_t seg = static_cast<std::int64_t>(segment_s) * 1000;
  const std::int64_t total = duration.millis();
  std::vector<TimeRange> out;
  out.reserve(static_cast<std::size_t>(total / seg + 1));
  std::int64_t t = 0;
  for (; t + seg <= total; t += seg) out.push_back(TimeRange::from_millis(t, t + seg));
  const std::int64_t rest = total - t;
  if (rest > 0) {
    if (rest < kMinTailMillis && !out.empty()) {
      out.back().end = Timecode(total);
    } else {
      out.push_back(TimeRange::from_millis(t, total));
    }
  }
  return out;
}

std::vector<TimeRange> clip_windows(Timecode duration, int window_s) {
  return partition_segments(duration, window_s);
}

namespace {

// Nearest frame to `target` among `candidates` (sorted, non-empty); ties go
// to the earlier frame.
const Frame& nearest(std::span<const Frame> candidates, double target) {
  auto it = std::lower_bound(candidates.begin(), candidates.end(), target,
                             [](const Frame& f, double t) { return static_cast<double>(f.at.millis()) < t; });
  if (it == candidates.begin()) return *it;
  if (it == candidates.end()) return *(it - 1);
  const double after = static_cast<double>(it->at.millis()) - target;
  const double before = target - static_cast<double>((it - 1)->at.millis());
  return before <= after ? *(it - 1) : *it;
}

std::vector<Frame> map_targets(std::span<const Frame> candidates, const std::vector<double>& targets) {
  std::vector<Frame> out;
  if (candidates.empty()) return out;
  for (double t : targets) {
    const Frame& f = nearest(candidates, t);
    if (out.empty() || !(out.back() == f)) out.push_back(f);
  }
  // Targets are increasing, so nearest frames are non-decreasing and the
  // adjacent-duplicate check above already leaves them sorted and unique.
  return out;
}

}  // namespace

std::vector<Frame> sample_uniform(const TimeRange& range, int n, const FrameManifest& manifest) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample_uniform needs n >= 1");
  const double start = static_cast<double>(range.start.millis());
  const double len = static_cast<double>(range.length_millis());
  std::vector<double> targets;
  targets.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    targets.push_back(start + (2.0 * i + 1.0) * len / (2.0 * n));
  }
  return map_targets(manifest.frames_in(range), targets);
}

std::vector<double> fps_targets(const TimeRange& range, double fps) {
  if (!(fps > 0)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");
  const double len_s = static_cast<double>(range.length_millis()) / 1000.0;
  const auto count = static_cast<std::int64_t>(std::ceil(len_s * fps));
  std::vector<double> targets;
  targets.reserve(static_cast<std::size_t>(count));
  const double start = static_cast<double>(range.start.millis());
  for (std::int64_t k = 0; k < count; ++k) {
    targets.push_back(start + static_cast<double>(k) * 1000.0 / fps);
  }
  return targets;
}

std::vector<Frame> sample_fps(const TimeRange& range, double fps, int cap,
                              const FrameManifest& manifest) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "sample_fps needs cap >= 1");
  return thin_uniform(map_targets(manifest.frames_in(range), fps_targets(range, fps)), cap);
}

std::vector<Frame> thin_uniform(std::vector<Frame> frames, int cap) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "thin_uniform needs cap >= 1");
  const auto m = static_cast<std::int64_t>(frames.size());
  if (m <= cap) return frames;
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(cap));
  if (cap == 1) {
    out.push_back(frames[static_cast<std::size_t>((m - 1) / 2)]);
    return out;
  }
  const std::int64_t denom = cap - 1;
  for (std::int64_t j = 0; j < cap; ++j) {
    // round-half-up of j * (m - 1) / (cap - 1) in integer arithmetic
    const auto idx = (2 * j * (m - 1) + denom) / (2 * denom);
    out.push_back(frames[static_cast<std::size_t>(idx)]);
  }
  return out;
}

}  // namespace symphony
