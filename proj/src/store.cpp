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

#include "loopskill/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "loopskill/errors.hpp"

namespace loopskill {

namespace fs = std::filesystem;

StorePaths StorePaths::under(const fs::path& root) {
  return StorePaths{root / "heartbeat.json", root / "skills"};
}

fs::path StorePaths::skill_dir_for(const std::string& task_id) const {
  return skills_dir / task_id;
}

fs::path StorePaths::skill_file_for(const std::string& task_id) const {
  return skill_dir_for(task_id) / "skill.json";
}

nlohmann::ordered_json config_to_json(const HeartbeatConfig& config) {
  nlohmann::ordered_json j;
  j["version"] = config.version;
  j["tasks"] = nlohmann::ordered_json::object();
  for (const auto& [id, task] : config.tasks) {
    j["tasks"][id] = task_to_json(task);
  }
  return j;
}

HeartbeatConfig config_from_json(const nlohmann::json& j) {
  try {
    HeartbeatConfig config;
    config.version = j.at("version").get<int>();
    for (const auto& [key, value] : j.at("tasks").items()) {
      LoopTask task = task_from_json(value);
      if (task.id != key) {
        throw CorruptionError("task key \"" + key + "\" does not match task id \"" + task.id +
                              "\"");
      }
      config.tasks.emplace(key, std::move(task));
    }
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed heartbeat config: ") + e.what());
  }
}

std::string serialize_config(const HeartbeatConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

HeartbeatConfig deserialize_config(std::string_view bytes) {
  nlohmann::json j = nlohmann::json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    throw CorruptionError("heartbeat config is not valid JSON");
  }
  return config_from_json(j);
}

namespace {

void probe_stage(const WriteProbe& probe, WriteStage stage) {
  if (probe) probe(stage);
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }
  void close_now() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

void write_all(int fd, const char* data, size_t len) {
  size_t off = 0;
  while (off < len) {
    ssize_t n = ::write(fd, data + off, len - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view content, const WriteProbe& probe) {
  fs::path parent = path.parent_path();
  if (parent.empty()) parent = ".";
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw IoError("parent directory does not exist: " + parent.string());
  }

  // The temp file must live in the target directory; rename is only atomic
  // within one filesystem.
  static std::atomic<unsigned> counter{0};
  fs::path temp = path;
  temp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));

  int raw = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (raw < 0) {
    throw IoError("cannot create temp file " + temp.string() + ": " + std::strerror(errno));
  }
  Fd fd(raw);
  probe_stage(probe, WriteStage::TempCreated);

  size_t half = content.size() / 2;
  try {
    write_all(fd.get(), content.data(), half);
    probe_stage(probe, WriteStage::HalfWritten);
    write_all(fd.get(), content.data() + half, content.size() - half);
  } catch (const IoError&) {
    fd.close_now();
    ::unlink(temp.c_str());
    throw;
  }
  probe_stage(probe, WriteStage::ContentWritten);

  if (::fsync(fd.get()) != 0) {
    int err = errno;
    fd.close_now();
    ::unlink(temp.c_str());
    throw IoError(std::string("fsync failed: ") + std::strerror(err));
  }
  probe_stage(probe, WriteStage::Synced);
  fd.close_now();

  if (::rename(temp.c_str(), path.c_str()) != 0) {
    int err = errno;
    ::unlink(temp.c_str());
    throw IoError("rename to " + path.string() + " failed: " + std::strerror(err));
  }
  probe_stage(probe, WriteStage::Renamed);
}

std::optional<std::string> read_file_if_exists(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return buf.str();
}

HeartbeatStore::HeartbeatStore(StorePaths paths) : paths_(std::move(paths)) {}

HeartbeatConfig HeartbeatStore::load_config() const {
  std::lock_guard lock(mutex_);
  auto bytes = read_file_if_exists(paths_.config_path);
  if (!bytes) return HeartbeatConfig{};
  return deserialize_config(*bytes);
}

void HeartbeatStore::persist_locked(const HeartbeatConfig& config) {
  atomic_write(paths_.config_path, serialize_config(config));
}

void HeartbeatStore::save_config(const HeartbeatConfig& config) {
  std::lock_guard lock(mutex_);
  if (critical_section_probe_) critical_section_probe_(true);
  persist_locked(config);
  if (critical_section_probe_) critical_section_probe_(false);
}

void HeartbeatStore::upsert_task(const LoopTask& task) {
  std::lock_guard lock(mutex_);
  if (critical_section_probe_) critical_section_probe_(true);
  HeartbeatConfig config = load_config();
  config.tasks[task.id] = task;
  persist_locked(config);
  if (critical_section_probe_) critical_section_probe_(false);
}

bool HeartbeatStore::remove_task(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (critical_section_probe_) critical_section_probe_(true);
  HeartbeatConfig config = load_config();
  bool removed = config.tasks.erase(id) > 0;
  if (removed) persist_locked(config);
  std::error_code ec;
  fs::remove_all(paths_.skill_dir_for(id), ec);
  if (critical_section_probe_) critical_section_probe_(false);
  return removed;
}

void HeartbeatStore::with_task(const std::string& id,
                               const std::function<void(LoopTask&)>& edit) {
  std::lock_guard lock(mutex_);
  if (critical_section_probe_) critical_section_probe_(true);
  HeartbeatConfig config = load_config();
  auto it = config.tasks.find(id);
  if (it == config.tasks.end()) {
    if (critical_section_probe_) critical_section_probe_(false);
    throw NotFoundError("no task with id \"" + id + "\"");
  }
  edit(it->second);
  it->second.id = id;  // edits cannot re-key the task
  persist_locked(config);
  if (critical_section_probe_) critical_section_probe_(false);
}

void HeartbeatStore::mark_run(const std::string& id, TimePoint at) {
  with_task(id, [&](LoopTask& task) {
    task.last_run = at;
    if (is_schedule(task.trigger)) {
      task.last_schedule_fire_date = format_date(at);
    }
  });
}

void HeartbeatStore::set_pending(const std::string& id, bool pending) {
  with_task(id, [&](LoopTask& task) { task.first_exec_pending = pending; });
}

void HeartbeatStore::attach_skill(const std::string& id, const std::string& skill_ref) {
  with_task(id, [&](LoopTask& task) { task.skill_ref = skill_ref; });
}

void HeartbeatStore::record_schedule_fire(const std::string& id, const std::string& date) {
  with_task(id, [&](LoopTask& task) { task.last_schedule_fire_date = date; });
}

std::optional<LoopTask> HeartbeatStore::find_task(const std::string& id) const {
  std::lock_guard lock(mutex_);
  HeartbeatConfig config = load_config();
  auto it = config.tasks.find(id);
  if (it == config.tasks.end()) return std::nullopt;
  return it->second;
}

void HeartbeatStore::set_critical_section_probe(std::function<void(bool)> probe) {
  std::lock_guard lock(mutex_);
  critical_section_probe_ = std::move(probe);
}

}  // namespace loopskill
