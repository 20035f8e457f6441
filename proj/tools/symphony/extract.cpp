#include "extract.hpp"

#include "symphony/error.hpp"
#include "symphony/harness.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <regex>
#include <vector>

namespace fs = std::filesystem;
using symphony::Error;
using symphony::ErrorCode;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string capture(const std::string& cmd) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw Error(ErrorCode::ConfigError, "cannot run: " + cmd);
  std::string out;
  std::array<char, 256> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe.get())) out += buf.data();
  return out;
}

bool have_tool(const char* name) {
  return std::system(fmt::format("command -v {} >/dev/null 2>&1", name).c_str()) == 0;
}

}  // namespace

fs::path run_extract(const ExtractOptions& opt) {
  if (!(opt.fps > 0)) throw Error(ErrorCode::InvalidArgument, "--fps must be positive");
  if (!fs::is_regular_file(opt.input)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("no such video file: {}", opt.input.string()));
  }
  for (const char* tool : {"ffmpeg", "ffprobe"}) {
    if (!have_tool(tool)) throw Error(ErrorCode::ConfigError, fmt::format("{} not found on PATH", tool));
  }

  const auto probe = capture(fmt::format(
      "ffprobe -v error -show_entries format=duration -of default=nw=1:nk=1 {}",
      shell_quote(opt.input.string())));
  double seconds = 0;
  try {
    seconds = std::stod(probe);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("ffprobe reported no duration for {}", opt.input.string()));
  }
  const auto duration_ms = static_cast<std::int64_t>(std::llround(seconds * 1000.0));
  if (duration_ms <= 0) throw Error(ErrorCode::InvalidArgument, "video has zero duration");

  fs::create_directories(opt.out_dir);
  const auto cmd = fmt::format(
      "ffmpeg -v error -y -i {} -vf \"fps={},scale=w='min(1280,iw)':h='min(720,ih)':"
      "force_original_aspect_ratio=decrease\" -q:v 2 {}",
      shell_quote(opt.input.string()), opt.fps, shell_quote((opt.out_dir / "%06d.jpg").string()));
  if (std::system(cmd.c_str()) != 0) {
    throw Error(ErrorCode::FrameLoadError, fmt::format("ffmpeg failed on {}", opt.input.string()));
  }

  static const std::regex kName(R"((\d{6})\.jpg)");
  std::vector<std::pair<std::int64_t, std::string>> frames;
  for (const auto& entry : fs::directory_iterator(opt.out_dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (!std::regex_match(name, m, kName)) continue;
    const auto index = std::stoll(m[1].str());
    const auto ms = static_cast<std::int64_t>(std::llround((index - 1) * 1000.0 / opt.fps));
    if (ms <= duration_ms) frames.emplace_back(ms, name);
  }
  if (frames.empty()) throw Error(ErrorCode::EmptyFrameSet, "ffmpeg produced no frames");
  std::sort(frames.begin(), frames.end());

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["video_id"] = opt.video_id.empty() ? opt.input.stem().string() : opt.video_id;
  manifest["duration_ms"] = duration_ms;
  manifest["source_fps"] = opt.fps;
  auto list = nlohmann::ordered_json::array();
  for (const auto& [ms, file] : frames) list.push_back({{"ms", ms}, {"file", file}});
  manifest["frames"] = std::move(list);
  const auto path = opt.out_dir / "manifest.json";
  symphony::write_json_file(path, manifest);
  return path;
}
