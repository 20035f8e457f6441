#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace symphony {

/// Offset from the start of a video, in milliseconds. Prompts only ever see
/// whole seconds (`HH:MM:SS`); sampling arithmetic stays in milliseconds.
class Timecode {
 public:
  constexpr Timecode() = default;
  constexpr explicit Timecode(std::int64_t millis) : millis_(millis < 0 ? 0 : millis) {}

  static constexpr Timecode from_seconds(std::int64_t s) { return Timecode(s * 1000); }

  constexpr std::int64_t millis() const { return millis_; }
  constexpr std::int64_t whole_seconds() const { return millis_ / 1000; }
  constexpr double seconds() const { return static_cast<double>(millis_) / 1000.0; }
  constexpr Timecode truncated_to_seconds() const { return Timecode(whole_seconds() * 1000); }

  constexpr auto operator<=>(const Timecode&) const = default;

 private:
  std::int64_t millis_ = 0;
};

/// Parses strict `HH:MM:SS` (hours may have more than two digits). Bare
/// `MM:SS` is rejected: the prompts insist on the three-field form.
Timecode parse_timecode(std::string_view text);

/// Zero-padded `HH:MM:SS`, sub-second remainder dropped.
std::string format_timecode(Timecode t);

/// Half-open interval [start, end).
struct TimeRange {
  Timecode start;
  Timecode end;

  TimeRange() = default;
  TimeRange(Timecode s, Timecode e);  // throws InvalidArgument unless s < e

  static TimeRange from_millis(std::int64_t s, std::int64_t e) {
    return TimeRange(Timecode(s), Timecode(e));
  }
  static TimeRange from_seconds(std::int64_t s, std::int64_t e) {
    return from_millis(s * 1000, e * 1000);
  }

  std::int64_t length_millis() const { return end.millis() - start.millis(); }
  bool contains(Timecode t) const { return start <= t && t < end; }

  auto operator<=>(const TimeRange&) const = default;
};

/// `[HH:MM:SS - HH:MM:SS]`
std::string format_range(const TimeRange& r);

}  // namespace symphony
