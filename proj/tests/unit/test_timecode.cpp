#include "symphony/error.hpp"
#include "symphony/timecode.hpp"

#include <doctest.h>

#include <random>

using namespace symphony;

TEST_CASE("format pads every field and drops the sub-second remainder") {
  CHECK(format_timecode(Timecode(0)) == "00:00:00");
  CHECK(format_timecode(Timecode(201'999)) == "00:03:21");
  CHECK(format_timecode(Timecode::from_seconds(3600 + 62)) == "01:01:02");
  CHECK(format_timecode(Timecode::from_seconds(100 * 3600)) == "100:00:00");
}

TEST_CASE("negative offsets clamp to zero") {
  CHECK(Timecode(-5).millis() == 0);
}

TEST_CASE("parse accepts only the three-field form") {
  CHECK(parse_timecode("00:03:21").millis() == 201'000);
  CHECK(parse_timecode("123:00:01").millis() == (123 * 3600 + 1) * 1000);

  for (const char* bad : {"03:21", "3:21:00", "00:3:21", "00:60:00", "00:00:60", "00:00:0a",
                          "", "00:00:00:00", " 00:00:01", "-1:00:00"}) {
    CAPTURE(bad);
    try {
      parse_timecode(bad);
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedTimecode);
    }
  }
}

TEST_CASE("parse(format(t)) equals t truncated to seconds") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> dist(0, 50LL * 3600 * 1000);
  for (int i = 0; i < 2000; ++i) {
    const Timecode t(dist(rng));
    CHECK(parse_timecode(format_timecode(t)) == t.truncated_to_seconds());
  }
}

TEST_CASE("time ranges must be non-empty") {
  CHECK_THROWS_AS(TimeRange::from_seconds(5, 5), Error);
  CHECK_THROWS_AS(TimeRange::from_seconds(6, 5), Error);
  const auto r = TimeRange::from_seconds(60, 120);
  CHECK(r.length_millis() == 60'000);
  CHECK(r.contains(Timecode::from_seconds(60)));
  CHECK_FALSE(r.contains(Timecode::from_seconds(120)));
  CHECK(format_range(r) == "[00:01:00 - 00:02:00]");
}
