/*
 * Copyright (c) the loopskill authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include "loopskill/clock.hpp"
#include "loopskill/errors.hpp"

using namespace loopskill;

TEST_CASE("make_time and civil_from round-trip") {
  TimePoint t = make_time(2025, 6, 1, 8, 30, 15);
  CivilTime c = civil_from(t);
  CHECK(c.year == 2025);
  CHECK(c.month == 6);
  CHECK(c.day == 1);
  CHECK(c.hour == 8);
  CHECK(c.minute == 30);
  CHECK(c.second == 15);
}

TEST_CASE("formatting") {
  TimePoint t = make_time(2025, 6, 1, 8, 30, 15);
  CHECK(format_date(t) == "2025-06-01");
  CHECK(format_timestamp(t) == "2025-06-01T08:30:15Z");
  CHECK(minute_of_day(t) == 8 * 60 + 30);
  CHECK(minute_of_day(make_time(2025, 6, 1)) == 0);
  CHECK(minute_of_day(make_time(2025, 6, 1, 23, 59, 59)) == 1439);
}

TEST_CASE("parse_timestamp accepts both separators and optional Z") {
  CHECK(parse_timestamp("2025-06-01T08:30:15Z") == make_time(2025, 6, 1, 8, 30, 15));
  CHECK(parse_timestamp("2025-06-01T08:30:15") == make_time(2025, 6, 1, 8, 30, 15));
  CHECK(parse_timestamp("2025-06-01 08:30:15") == make_time(2025, 6, 1, 8, 30, 15));
}

TEST_CASE("parse_timestamp rejects malformed input") {
  CHECK_THROWS_AS(parse_timestamp(""), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2025-06-01"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2025-06-01T08:30"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("not-a-time-at-allZ"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2025-13-01T00:00:00Z"), ParseError);
}

TEST_CASE("parse and format are inverse on the storage form") {
  const char* samples[] = {"1999-12-31T23:59:59Z", "2024-02-29T00:00:00Z",
                           "2026-08-22T12:00:01Z"};
  for (const char* s : samples) {
    CHECK(format_timestamp(parse_timestamp(s)) == s);
  }
}

TEST_CASE("manual clock advances deterministically") {
  ManualClock clock(make_time(2025, 6, 1, 8, 0, 0));
  CHECK(clock.now() == make_time(2025, 6, 1, 8, 0, 0));
  clock.advance(std::chrono::minutes(30));
  CHECK(clock.now() == make_time(2025, 6, 1, 8, 30, 0));
  clock.set(make_time(2026, 1, 1));
  CHECK(format_date(clock.now()) == "2026-01-01");
}

TEST_CASE("fixed clock pins a single instant") {
  FixedClock clock(make_time(2025, 6, 2, 9, 0, 0));
  CHECK(clock.now() == clock.now());
  CHECK(format_timestamp(clock.now()) == "2025-06-02T09:00:00Z");
}
