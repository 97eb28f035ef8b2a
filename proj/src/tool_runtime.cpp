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

#include "loopskill/tool_runtime.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "loopskill/errors.hpp"

namespace loopskill {

namespace fs = std::filesystem;

std::string_view to_string(ToolKind tool) {
  switch (tool) {
    case ToolKind::Bash:
      return "bash";
    case ToolKind::ReadFile:
      return "read_file";
    case ToolKind::WriteFile:
      return "write_file";
    case ToolKind::EditFile:
      return "edit_file";
  }
  return "unknown";
}

ToolKind tool_from_string(std::string_view name) {
  if (name == "bash") return ToolKind::Bash;
  if (name == "read_file") return ToolKind::ReadFile;
  if (name == "write_file") return ToolKind::WriteFile;
  if (name == "edit_file") return ToolKind::EditFile;
  throw ParseError("unknown tool \"" + std::string(name) + "\"");
}

namespace {

const std::vector<std::string>& schema_keys(ToolKind tool) {
  static const std::vector<std::string> bash{"command"};
  static const std::vector<std::string> read{"path"};
  static const std::vector<std::string> write{"path", "content"};
  static const std::vector<std::string> edit{"path", "old_string", "new_string"};
  switch (tool) {
    case ToolKind::Bash:
      return bash;
    case ToolKind::ReadFile:
      return read;
    case ToolKind::WriteFile:
      return write;
    case ToolKind::EditFile:
      return edit;
  }
  return bash;
}

std::string run_shell(const std::string& command, const fs::path& workdir,
                      std::chrono::milliseconds timeout) {
  int fds[2];
  if (::pipe(fds) != 0) {
    throw IoError(std::string("pipe failed: ") + std::strerror(errno));
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw IoError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    if (::chdir(workdir.c_str()) != 0) _exit(126);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(fds[1]);

  std::string output;
  auto deadline = std::chrono::steady_clock::now() + timeout;
  bool timed_out = false;
  char buf[4096];
  while (true) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      timed_out = true;
      break;
    }
    struct pollfd pfd{fds[0], POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) {
      timed_out = true;
      break;
    }
    ssize_t n = ::read(fds[0], buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;  // all writers closed
    output.append(buf, static_cast<size_t>(n));
  }
  ::close(fds[0]);

  if (timed_out) {
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    return "Error: timeout";
  }

  int status = 0;
  ::waitpid(pid, &status, 0);
  if (WIFEXITED(status)) {
    int code = WEXITSTATUS(status);
    if (code == 0) return output;
    return "Error: command exited with status " + std::to_string(code) + ": " + output;
  }
  if (WIFSIGNALED(status)) {
    return "Error: command killed by signal " + std::to_string(WTERMSIG(status)) + ": " + output;
  }
  return output;
}

}  // namespace

void check_args(ToolKind tool, const ArgMap& args) {
  const auto& keys = schema_keys(tool);
  bool ok = args.size() == keys.size();
  if (ok) {
    for (const auto& key : keys) ok = ok && args.count(key) > 0;
  }
  if (!ok) {
    std::string expected;
    for (const auto& key : keys) {
      if (!expected.empty()) expected += ", ";
      expected += key;
    }
    throw std::invalid_argument("args for " + std::string(to_string(tool)) +
                                " must be exactly {" + expected + "}");
  }
}

fs::path resolve_sandboxed(const fs::path& workdir, const std::string& path_arg) {
  std::error_code ec;
  fs::path base = fs::weakly_canonical(workdir, ec);
  if (ec) throw SandboxError("workdir is not resolvable: " + workdir.string());
  fs::path candidate = fs::path(path_arg).is_absolute() ? fs::path(path_arg) : base / path_arg;
  fs::path resolved = fs::weakly_canonical(candidate, ec);
  if (ec) throw SandboxError("path is not resolvable: " + path_arg);
  auto [base_end, resolved_it] =
      std::mismatch(base.begin(), base.end(), resolved.begin(), resolved.end());
  if (base_end != base.end()) {
    throw SandboxError("path escapes workdir: " + path_arg);
  }
  return resolved;
}

std::string LocalToolRunner::execute(ToolKind tool, const ArgMap& args, const fs::path& workdir) {
  check_args(tool, args);
  switch (tool) {
    case ToolKind::Bash:
      return run_shell(args.at("command"), workdir, options_.bash_timeout);
    case ToolKind::ReadFile: {
      const std::string& path_arg = args.at("path");
      fs::path path = resolve_sandboxed(workdir, path_arg);
      std::error_code ec;
      if (!fs::is_regular_file(path, ec)) {
        return "Error: file not found: " + path_arg;
      }
      std::ifstream in(path, std::ios::binary);
      if (!in) return "Error: file not found: " + path_arg;
      std::ostringstream buf;
      buf << in.rdbuf();
      return buf.str();
    }
    case ToolKind::WriteFile: {
      const std::string& path_arg = args.at("path");
      const std::string& content = args.at("content");
      fs::path path = resolve_sandboxed(workdir, path_arg);
      std::error_code ec;
      fs::create_directories(path.parent_path(), ec);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) return "Error: cannot write file: " + path_arg;
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      out.flush();
      if (!out) return "Error: cannot write file: " + path_arg;
      return "ok: wrote " + std::to_string(content.size()) + " bytes to " + path_arg;
    }
    case ToolKind::EditFile: {
      const std::string& path_arg = args.at("path");
      fs::path path = resolve_sandboxed(workdir, path_arg);
      std::error_code ec;
      if (!fs::is_regular_file(path, ec)) {
        return "Error: file not found: " + path_arg;
      }
      std::ifstream in(path, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      std::string content = buf.str();
      in.close();
      const std::string& old_string = args.at("old_string");
      size_t pos = old_string.empty() ? std::string::npos : content.find(old_string);
      if (pos == std::string::npos) {
        return "Error: old_string not found in " + path_arg;
      }
      content.replace(pos, old_string.size(), args.at("new_string"));
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      out.flush();
      if (!out) return "Error: cannot write file: " + path_arg;
      return "ok: edited " + path_arg;
    }
  }
  throw std::invalid_argument("unknown tool");
}

std::string execute_tool(ToolKind tool, const ArgMap& args, const fs::path& workdir,
                         const LocalToolRunnerOptions& options) {
  LocalToolRunner runner(options);
  return runner.execute(tool, args, workdir);
}

std::string Recorder::record(ToolKind tool, const ArgMap& args) {
  if (!enabled_) throw std::logic_error("recorder is disabled");
  std::string result = runner_.execute(tool, args, workdir_);
  ToolCall call;
  call.step = static_cast<int>(chain_.calls.size()) + 1;
  call.tool = tool;
  call.args = args;
  call.result = result;
  chain_.calls.push_back(std::move(call));
  return chain_.calls.back().result;
}

ToolChain Recorder::take_chain() {
  ToolChain out = std::move(chain_);
  chain_ = ToolChain{};
  return out;
}

nlohmann::ordered_json args_to_ordered_json(ToolKind tool, const ArgMap& args) {
  // Emit keys in schema order, not alphabetically.
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& key : schema_keys(tool)) {
    j[key] = args.at(key);
  }
  return j;
}

nlohmann::ordered_json chain_to_json(const ToolChain& chain) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& call : chain.calls) {
    nlohmann::ordered_json c;
    c["step"] = call.step;
    c["tool"] = std::string(to_string(call.tool));
    c["args"] = args_to_ordered_json(call.tool, call.args);
    c["result"] = call.result;
    j.push_back(std::move(c));
  }
  return j;
}

ToolChain chain_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_array()) throw CorruptionError("tool chain document must be a JSON array");
    ToolChain chain;
    for (const auto& c : j) {
      ToolCall call;
      call.step = c.at("step").get<int>();
      call.tool = tool_from_string(c.at("tool").get<std::string>());
      for (const auto& [key, value] : c.at("args").items()) {
        call.args[key] = value.get<std::string>();
      }
      check_args(call.tool, call.args);
      call.result = c.at("result").get<std::string>();
      chain.calls.push_back(std::move(call));
    }
    for (size_t i = 0; i < chain.calls.size(); ++i) {
      if (chain.calls[i].step != static_cast<int>(i) + 1) {
        throw CorruptionError("tool chain steps are not contiguous from 1");
      }
    }
    return chain;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed tool chain: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CorruptionError(std::string("malformed tool chain: ") + e.what());
  } catch (const ParseError& e) {
    throw CorruptionError(std::string("malformed tool chain: ") + e.what());
  }
}

std::string serialize_chain(const ToolChain& chain) { return chain_to_json(chain).dump(2) + "\n"; }

ToolChain deserialize_chain(std::string_view bytes) {
  nlohmann::json j = nlohmann::json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw CorruptionError("tool chain is not valid JSON");
  return chain_from_json(j);
}

}  // namespace loopskill
