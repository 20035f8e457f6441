#include "symphony/error.hpp"
#include "symphony/subtitles.hpp"

#include <doctest.h>

using namespace symphony;

TEST_CASE("SRT cues with multi-line bodies") {
  const auto track = parse_subtitles_text(
      "\xEF\xBB\xBF"
      "1\r\n00:15:32,100 --> 00:15:35,900\r\nHello there\r\nfriend\r\n\r\n"
      "2\r\n00:18:05,000 --> 00:18:09,000\r\nSecond line\r\n");
  REQUIRE(track.cues.size() == 2);
  CHECK(track.cues[0].range == TimeRange::from_millis(932'100, 935'900));
  CHECK(track.cues[0].text == "Hello there friend");
  CHECK(render_subtitles(track) ==
        "[00:15:32 - 00:15:35]: Hello there friend\n[00:18:05 - 00:18:09]: Second line");
}

TEST_CASE("WebVTT with settings, short timestamps and notes") {
  const auto track = parse_subtitles_text(
      "WEBVTT\n\nNOTE a comment\n\n"
      "intro\n00:01.000 --> 00:04.500 align:start position:10%\nShort form\n\n"
      "01:00:00.000 --> 01:00:02.000\nLong form\n");
  REQUIRE(track.cues.size() == 2);
  CHECK(track.cues[0].range == TimeRange::from_millis(1000, 4500));
  CHECK(track.cues[1].range.start == Timecode::from_seconds(3600));
}

TEST_CASE("degenerate cues are dropped and cues are ordered by start") {
  const auto track = parse_subtitles_text(
      "1\n00:00:10,000 --> 00:00:12,000\nlater\n\n"
      "2\n00:00:05,000 --> 00:00:05,000\nzero length\n\n"
      "3\n00:00:01,000 --> 00:00:02,000\nearlier\n");
  REQUIRE(track.cues.size() == 2);
  CHECK(track.cues[0].text == "earlier");
  CHECK(track.cues[1].text == "later");
}

TEST_CASE("malformed timing lines are rejected") {
  try {
    parse_subtitles_text("1\n00:00:xx,000 --> 00:00:02,000\ntext\n");
    FAIL("accepted a bad timing line");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedSubtitleFile);
  }
  CHECK_THROWS_AS(parse_subtitles_text("just some prose\nwith no cues\n"), Error);
  CHECK(parse_subtitles_text("").empty());
  CHECK(parse_subtitles_text("WEBVTT\n").empty());
}
