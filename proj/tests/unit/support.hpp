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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "loopskill/tool_runtime.hpp"

namespace loopskill::testing {

/// Self-deleting unique temp directory.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "loopskill-XXXXXX").string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (::mkdtemp(buf.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline ToolCall make_call(int step, ToolKind tool, ArgMap args, std::string result) {
  return ToolCall{step, tool, std::move(args), std::move(result)};
}

inline std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// Tool runner with canned responses; records everything it executes.
/// The responder sees the 0-based execution index.
class StubRunner final : public ToolRunner {
 public:
  using Responder = std::function<std::string(ToolKind, const ArgMap&, int)>;

  explicit StubRunner(Responder responder) : responder_(std::move(responder)) {}

  std::string execute(ToolKind tool, const ArgMap& args,
                      const std::filesystem::path& /*workdir*/) override {
    std::lock_guard lock(mutex_);
    int index = static_cast<int>(executed_.size());
    std::string result = responder_(tool, args, index);
    executed_.push_back({tool, args, result});
    return result;
  }

  struct Executed {
    ToolKind tool;
    ArgMap args;
    std::string result;
  };

  std::vector<Executed> executed() const {
    std::lock_guard lock(mutex_);
    return executed_;
  }

  size_t call_count() const {
    std::lock_guard lock(mutex_);
    return executed_.size();
  }

 private:
  Responder responder_;
  mutable std::mutex mutex_;
  std::vector<Executed> executed_;
};

}  // namespace loopskill::testing
