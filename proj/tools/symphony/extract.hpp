#pragma once

#include <filesystem>
#include <string>

struct ExtractOptions {
  std::filesystem::path input;
  std::filesystem::path out_dir;
  double fps = 1.0;
  std::string video_id;  // defaults to the input file stem
};

/// Decodes `input` with ffmpeg into `<out_dir>/NNNNNN.jpg` at `fps`, capped at
/// 1280x720, and writes `<out_dir>/manifest.json`. Returns the manifest path.
/// Throws symphony::Error(ConfigError) when ffmpeg or ffprobe is unavailable.
std::filesystem::path run_extract(const ExtractOptions& options);
