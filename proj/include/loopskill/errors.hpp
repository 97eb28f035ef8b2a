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

#include <stdexcept>
#include <string>

namespace loopskill {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input (interval expressions, schedule syntax, task descriptions).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A task, skill, or plan that was looked up by key does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A persisted document exists but cannot be parsed. Never auto-healed.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or subprocess failure outside the in-band tool error convention.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A tool argument path resolves outside the task workdir.
class SandboxError : public Error {
 public:
  using Error::Error;
};

/// Template extraction produced an unusable skill.
class CompileError : public Error {
 public:
  using Error::Error;
};

/// A template placeholder has no binding in the replay context.
class UnresolvedVariableError : public Error {
 public:
  using Error::Error;
};

}  // namespace loopskill
