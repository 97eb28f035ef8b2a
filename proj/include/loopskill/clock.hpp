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

#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <string_view>

namespace loopskill {

// All timestamps are UTC at second precision.
using TimePoint = std::chrono::sys_seconds;

/// Injectable time source. Every component that needs wall-clock time takes a
/// Clock so tests can pin or advance time deterministically.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
};

class SystemClock final : public Clock {
 public:
  TimePoint now() const override {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  }
};

/// Settable clock for tests and `tick --now` overrides.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimePoint start) : now_(start) {}

  TimePoint now() const override {
    std::lock_guard lock(mutex_);
    return now_;
  }

  void set(TimePoint t) {
    std::lock_guard lock(mutex_);
    now_ = t;
  }

  void advance(std::chrono::seconds by) {
    std::lock_guard lock(mutex_);
    now_ += by;
  }

 private:
  mutable std::mutex mutex_;
  TimePoint now_;
};

/// Clock pinned to a single instant; used to hand a tick's `now` down to replay.
class FixedClock final : public Clock {
 public:
  explicit FixedClock(TimePoint t) : now_(t) {}
  TimePoint now() const override { return now_; }

 private:
  TimePoint now_;
};

struct CivilTime {
  int year = 0;
  unsigned month = 0;
  unsigned day = 0;
  unsigned hour = 0;
  unsigned minute = 0;
  unsigned second = 0;
};

CivilTime civil_from(TimePoint tp);

TimePoint make_time(int year, unsigned month, unsigned day, unsigned hour = 0,
                    unsigned minute = 0, unsigned second = 0);

/// Minutes since midnight, in [0, 1440).
int minute_of_day(TimePoint tp);

/// "YYYY-MM-DD"
std::string format_date(TimePoint tp);

///// "YYYY-MM-DDTHH:MM:SSZ", the storage form for persisted timestamps.
std::string format_timestamp(TimePoint tp);

/// Parses "YYYY-MM-DDTHH:MM:SS" with an optional trailing "Z".
TimePoint parse_timestamp(std::string_view text);

}  // namespace loopskill
