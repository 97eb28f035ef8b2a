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

#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include "loopskill/clock.hpp"
#include "loopskill/errors.hpp"
#include "loopskill/store.hpp"
#include "support.hpp"

using namespace loopskill;
using loopskill::testing::TempDir;
using loopskill::testing::read_file_bytes;

namespace {

struct InjectedCrash {};

LoopTask sample_task(const std::string& id) {
  LoopTask task;
  task.id = id;
  task.description = "watch the logs";
  task.trigger = IntervalTrigger{IntervalSpec{30}};
  return task;
}

}  // namespace

TEST_CASE("atomic_write creates and replaces") {
  TempDir dir;
  auto target = dir.path() / "f.txt";
  atomic_write(target, "one");
  CHECK(read_file_bytes(target) == "one");
  atomic_write(target, "two");
  CHECK(read_file_bytes(target) == "two");
  // no temp litter on the happy path
  size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("atomic_write requires an existing parent directory") {
  TempDir dir;
  CHECK_THROWS_AS(atomic_write(dir.path() / "no" / "such" / "f.txt", "x"), IoError);
}

TEST_CASE("a crash at any stage before rename leaves the old content intact") {
  const WriteStage stages[] = {WriteStage::TempCreated, WriteStage::HalfWritten,
                               WriteStage::ContentWritten, WriteStage::Synced};
  for (WriteStage crash_at : stages) {
    TempDir dir;
    auto target = dir.path() / "heartbeat.json";
    atomic_write(target, "ORIGINAL");

    CHECK_THROWS_AS(atomic_write(target, "REPLACEMENT",
                                 [&](WriteStage stage) {
                                   if (stage == crash_at) throw InjectedCrash{};
                                 }),
                    InjectedCrash);
    CHECK(read_file_bytes(target) == "ORIGINAL");

    // the store must stay writable after the simulated crash
    atomic_write(target, "AFTER");
    CHECK(read_file_bytes(target) == "AFTER");
  }
}

TEST_CASE("a crash after rename means the new content is fully visible") {
  TempDir dir;
  auto target = dir.path() / "heartbeat.json";
  atomic_write(target, "ORIGINAL");
  CHECK_THROWS_AS(atomic_write(target, "REPLACEMENT",
                               [](WriteStage stage) {
                                 if (stage == WriteStage::Renamed) throw InjectedCrash{};
                               }),
                  InjectedCrash);
  CHECK(read_file_bytes(target) == "REPLACEMENT");
}

TEST_CASE("load_config on a missing file yields an empty config") {
  TempDir dir;
  HeartbeatStore store(StorePaths::under(dir.path()));
  HeartbeatConfig config = store.load_config();
  CHECK(config.version == 1);
  CHECK(config.tasks.empty());
}

TEST_CASE("load_config on an unparseable file reports corruption") {
  TempDir dir;
  StorePaths paths = StorePaths::under(dir.path());
  std::ofstream(paths.config_path) << "{ nope";
  HeartbeatStore store(paths);
  CHECK_THROWS_AS(store.load_config(), CorruptionError);
}

TEST_CASE("upsert, find, mark_run, set_pending, attach_skill") {
  TempDir dir;
  HeartbeatStore store(StorePaths::under(dir.path()));
  store.upsert_task(sample_task("loop_logs_aaaa"));

  auto found = store.find_task("loop_logs_aaaa");
  REQUIRE(found);
  CHECK(found->description == "watch the logs");
  CHECK(!store.find_task("loop_nope_zzzz"));

  TimePoint at = make_time(2025, 6, 1, 8, 0, 0);
  store.mark_run("loop_logs_aaaa", at);
  store.set_pending("loop_logs_aaaa", false);
  store.attach_skill("loop_logs_aaaa", "skills/loop_logs_aaaa/skill.json");

  // a fresh store object sees the persisted state
  HeartbeatStore reopened(StorePaths::under(dir.path()));
  auto task = reopened.find_task("loop_logs_aaaa");
  REQUIRE(task);
  CHECK(task->last_run == at);
  CHECK(!task->first_exec_pending);
  CHECK(task->skill_ref == "skills/loop_logs_aaaa/skill.json");
}

TEST_CASE("mark_run records the fire date for schedule tasks") {
  TempDir dir;
  HeartbeatStore store(StorePaths::under(dir.path()));
  LoopTask task = sample_task("loop_daily_bbbb");
  task.trigger = ScheduleTrigger{9 * 60};
  store.upsert_task(task);
  store.mark_run("loop_daily_bbbb", make_time(2025, 6, 1, 9, 2, 0));
  auto back = store.find_task("loop_daily_bbbb");
  REQUIRE(back);
  CHECK(back->last_schedule_fire_date == "2025-06-01");
}

TEST_CASE("with_task edits atomically and rejects unknown ids") {
  TempDir dir;
  HeartbeatStore store(StorePaths::under(dir.path()));
  store.upsert_task(sample_task("loop_logs_aaaa"));
  store.with_task("loop_logs_aaaa", [](LoopTask& t) { t.enabled = false; });
  CHECK(!store.find_task("loop_logs_aaaa")->enabled);
  CHECK_THROWS_AS(store.with_task("loop_gone_zzzz", [](LoopTask&) {}), NotFoundError);
}

TEST_CASE("with_task tolerates re-entrant store reads") {
  TempDir dir;
  HeartbeatStore store(StorePaths::under(dir.path()));
  store.upsert_task(sample_task("loop_logs_aaaa"));
  store.with_task("loop_logs_aaaa", [&](LoopTask& t) {
    auto self = store.find_task("loop_logs_aaaa");  // must not deadlock
    REQUIRE(self);
    t.description = self->description + " twice";
  });
  CHECK(store.find_task("loop_logs_aaaa")->description == "watch the logs twice");
}

TEST_CASE("remove_task deletes the task and its skill directory") {
  TempDir dir;
  StorePaths paths = StorePaths::under(dir.path());
  HeartbeatStore store(paths);
  store.upsert_task(sample_task("loop_logs_aaaa"));
  std::filesystem::create_directories(paths.skill_dir_for("loop_logs_aaaa"));
  std::ofstream(paths.skill_file_for("loop_logs_aaaa")) << "{}";

  CHECK(store.remove_task("loop_logs_aaaa"));
  CHECK(!store.find_task("loop_logs_aaaa"));
  CHECK(!std::filesystem::exists(paths.skill_dir_for("loop_logs_aaaa")));
  // idempotent: second removal reports absence
  CHECK(!store.remove_task("loop_logs_aaaa"));
}

TEST_CASE("config serialization is byte-stable") {
  HeartbeatConfig config;
  LoopTask task = sample_task("loop_logs_aaaa");
  config.tasks[task.id] = task;
  const std::string expected = R"({
  "version": 1,
  "tasks": {
    "loop_logs_aaaa": {
      "id": "loop_logs_aaaa",
      "description": "watch the logs",
      "trigger": {
        "mode": "interval",
        "minutes": 30
      },
      "active_hours": null,
      "first_exec_pending": true,
      "enabled": true,
      "last_run": null,
      "last_schedule_fire_date": null,
      "skill_ref": null
    }
  }
}
)";
  CHECK(serialize_config(config) == expected);
  CHECK(deserialize_config(expected).tasks.at("loop_logs_aaaa") == task);
}

TEST_CASE("config with mismatched task key is corrupt") {
  const char* doc = R"({
  "version": 1,
  "tasks": {
    "loop_other_zzzz": {
      "id": "loop_logs_aaaa",
      "description": "watch the logs",
      "trigger": {"mode": "interval", "minutes": 30},
      "active_hours": null,
      "first_exec_pending": true,
      "enabled": true,
      "last_run": null,
      "last_schedule_fire_date": null,
      "skill_ref": null
    }
  }
})";
  CHECK_THROWS_AS(deserialize_config(doc), CorruptionError);
}

TEST_CASE("concurrent upserts never tear the config file") {
  TempDir dir;
  HeartbeatStore store(StorePaths::under(dir.path()));
  constexpr int kWriters = 8;
  constexpr int kPerWriter = 25;
  std::vector<std::thread> writers;
  writers.reserve(kWriters);
  for (int w = 0; w < kWriters; ++w) {
    writers.emplace_back([&store, w] {
      for (int i = 0; i < kPerWriter; ++i) {
        LoopTask task = sample_task("loop_w" + std::to_string(w) + "_t" + std::to_string(i));
        store.upsert_task(task);
      }
    });
  }
  for (auto& t : writers) t.join();
  HeartbeatConfig config = store.load_config();
  CHECK(config.tasks.size() == kWriters * kPerWriter);
}
