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
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace loopskill {

enum class ToolKind { Bash, ReadFile, WriteFile, EditFile };

std::string_view to_string(ToolKind tool);
ToolKind tool_from_string(std::string_view name);

using ArgMap = std::map<std::string, std::string>;

/// One recorded invocation. Tool failures are carried IN-BAND as a result
/// string beginning with "Error: " so validation can inspect them.
struct ToolCall {
  int step = 0;  // 1-based, contiguous within a chain
  ToolKind tool = ToolKind::Bash;
  ArgMap args;
  std::string result;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct ToolChain {
  std::vector<ToolCall> calls;

  bool empty() const { return calls.empty(); }
  size_t size() const { return calls.size(); }

  friend bool operator==(const ToolChain&, const ToolChain&) = default;
};

nlohmann::ordered_json chain_to_json(const ToolChain& chain);
ToolChain chain_from_json(const nlohmann::json& j);
std::string serialize_chain(const ToolChain& chain);
ToolChain deserialize_chain(std::string_view bytes);

/// Serializes args with keys in schema order so emitted documents are
/// byte-stable.
nlohmann::ordered_json args_to_ordered_json(ToolKind tool, const ArgMap& args);

/// Executes one tool invocation. Implementations return failures in-band with
/// an "Error: " prefix and throw only on sandbox violations.
class ToolRunner {
 public:
  virtual ~ToolRunner() = default;
  virtual std::string execute(ToolKind tool, const ArgMap& args,
                              const std::filesystem::path& workdir) = 0;
};

struct LocalToolRunnerOptions {
  std::chrono::milliseconds bash_timeout{60'000};
};

/// Real tool vocabulary: shell subprocess plus file read/write/edit confined
/// to the workdir sandbox.
class LocalToolRunner final : public ToolRunner {
 public:
  LocalToolRunner() = default;
  explicit LocalToolRunner(LocalToolRunnerOptions options) : options_(options) {}

  std::string execute(ToolKind tool, const ArgMap& args,
                      const std::filesystem::path& workdir) override;

 private:
  LocalToolRunnerOptions options_;
};

/// One-shot convenience over LocalToolRunner.
std::string execute_tool(ToolKind tool, const ArgMap& args, const std::filesystem::path& workdir,
                         const LocalToolRunnerOptions& options = {});

/// Validates that `args` carries exactly the keys of the tool's schema.
/// Throws std::invalid_argument otherwise.
void check_args(ToolKind tool, const ArgMap& args);

/// Resolves a tool path argument against the workdir and rejects escapes.
std::filesystem::path resolve_sandboxed(const std::filesystem::path& workdir,
                                        const std::string& path_arg);

/// Transparent interception: delegates to the runner, appends a ToolCall with
/// the next step index, and returns the result unchanged.
class Recorder {
 public:
  Recorder(ToolRunner& runner, std::filesystem::path workdir)
      : runner_(runner), workdir_(std::move(workdir)) {}

  std::string record(ToolKind tool, const ArgMap& args);

  const ToolChain& chain() const { return chain_; }
  ToolChain take_chain();
  const std::filesystem::path& workdir() const { return workdir_; }
  bool enabled() const { return enabled_; }
  void disable() { enabled_ = false; }

 private:
  ToolRunner& runner_;
  std::filesystem::path workdir_;
  ToolChain chain_;
  bool enabled_ = true;
};

}  // namespace loopskill
