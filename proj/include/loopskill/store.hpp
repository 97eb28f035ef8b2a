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

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "loopskill/task.hpp"

namespace loopskill {

struct StorePaths {
  std::filesystem::path config_path;
  std::filesystem::path skills_dir;

  /// root/heartbeat.json and root/skills.
  static StorePaths under(const std::filesystem::path& root);

  std::filesystem::path skill_dir_for(const std::string& task_id) const;
  std::filesystem::path skill_file_for(const std::string& task_id) const;
};

struct HeartbeatConfig {
  int version = 1;
  std::map<std::string, LoopTask> tasks;  // keyed by task id; map order drives tick order

  friend bool operator==(const HeartbeatConfig&, const HeartbeatConfig&) = default;
};

nlohmann::ordered_json config_to_json(const HeartbeatConfig& config);
HeartbeatConfig config_from_json(const nlohmann::json& j);

/// Serialized form written to disk: 2-space indented JSON plus trailing newline.
/// Key order is fixed so identical configs serialize to identical bytes.
std::string serialize_config(const HeartbeatConfig& config);
HeartbeatConfig deserialize_config(std::string_view bytes);

/// Internal stages of atomic_write, exposed so tests can abort the operation
/// between any two steps and assert the target file survives intact.
enum class WriteStage { TempCreated, HalfWritten, ContentWritten, Synced, Renamed };

using WriteProbe = std::function<void(WriteStage)>;

/// Crash-safe file replacement: temp file in the target directory, fsync,
/// rename over the target. A reader at `path` sees either the complete old
/// content or the complete new content, never a partial document.
/// Throws IoError if the parent directory is missing or on I/O failure; the
/// prior content is untouched in every failure case.
void atomic_write(const std::filesystem::path& path, std::string_view content,
                  const WriteProbe& probe = {});

/// Reads a whole file. Returns nullopt if it does not exist.
std::optional<std::string> read_file_if_exists(const std::filesystem::path& path);

/// Data layer for heartbeat.json and the per-task skill directories. All
/// mutations serialize through one re-entrant lock and persist via
/// atomic_write before returning. Contains no execution logic.
class HeartbeatStore {
 public:
  explicit HeartbeatStore(StorePaths paths);

  const StorePaths& paths() const { return paths_; }

  /// Missing file yields an empty config; an unparseable file throws
  /// CorruptionError (never silently reset).
  HeartbeatConfig load_config() const;

  void save_config(const HeartbeatConfig& config);

  void upsert_task(const LoopTask& task);

  /// Deletes the task and its skill directory. Returns false if absent.
  bool remove_task(const std::string& id);

  /// Sets last_run; for Schedule tasks also records the fire date.
  void mark_run(const std::string& id, TimePoint at);

  void set_pending(const std::string& id, bool pending);

  void attach_skill(const std::string& id, const std::string& skill_ref);

  /// Records same-day dedup state without touching last_run.
  void record_schedule_fire(const std::string& id, const std::string& date);

  /// Read-modify-write of one task under the store lock.
  /// Throws NotFoundError if the id is unknown.
  void with_task(const std::string& id, const std::function<void(LoopTask&)>& edit);

  std::optional<LoopTask> find_task(const std::string& id) const;

  /// Test hook: called with true on critical-section entry and false on exit,
  /// while the store lock is held. Used by the interleaving monitor.
  void set_critical_section_probe(std::function<void(bool)> probe);

 private:
  void persist_locked(const HeartbeatConfig& config);

  StorePaths paths_;
  mutable std::recursive_mutex mutex_;
  std::function<void(bool)> critical_section_probe_;
};

}  // namespace loopskill
