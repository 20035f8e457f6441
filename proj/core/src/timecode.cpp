#include "symphony/timecode.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>

namespace symphony {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::int64_t to_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedTimecode, fmt::format("number out of range: '{}'", s));
  }
  return v;
}

}  // namespace

Timecode parse_timecode(std::string_view text) {
  auto fail = [&]() -> Error {
    return Error(ErrorCode::MalformedTimecode,
                 fmt::format("expected HH:MM:SS, got '{}'", text));
  };
  const auto first = text.find(':');
  if (first == std::string_view::npos) throw fail();
  const auto second = text.find(':', first + 1);
  if (second == std::string_view::npos) throw fail();
  if (text.find(':', second + 1) != std::string_view::npos) throw fail();

  const auto hh = text.substr(0, first);
  const auto mm = text.substr(first + 1, second - first - 1);
  const auto ss = text.substr(second + 1);
  if (hh.size() < 2 || mm.size() != 2 || ss.size() != 2) throw fail();
  if (!all_digits(hh) || !all_digits(mm) || !all_digits(ss)) throw fail();

  const auto h = to_int(hh);
  const auto m = to_int(mm);
  const auto s = to_int(ss);
  if (m >= 60 || s >= 60) throw fail();
  return Timecode((3600 * h + 60 * m + s) * 1000);
}

std::string format_timecode(Timecode t) {
  const auto total = t.whole_seconds();
  return fmt::format("{:02}:{:02}:{:02}", total / 3600, (total / 60) % 60, total % 60);
}

TimeRange::TimeRange(Timecode s, Timecode e) : start(s), end(e) {
  if (!(s < e)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("empty time range [{} ms, {} ms)", s.millis(), e.millis()));
  }
}

std::string format_range(const TimeRange& r) {
  return fmt::format("[{} - {}]", format_timecode(r.start), format_timecode(r.end));
}

}  // namespace symphony
