/**
 * Copyright 2026 The agic Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
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
#include <utility>

namespace agic {

// Base of every error thrown by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Index outside a container's declared range (e.g. a layer index >= L).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Array shape that violates a structural contract (non-square patch count).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Image or map dimensions that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad scalar input: non-finite logits, out-of-range parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

// Missing key: unknown image id, candidate without references.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A document or value failed invariant validation. `where()` is a JSON
// pointer-style location into the offending document, empty if unknown.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(where) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// File could not be read or parsed at all.
class IoError : public Error {
 public:
  using Error::Error;
};

// Failure raised by a model backend during decoding, tagged with position.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t step, std::size_t beam, const std::string& what)
      : Error("decode step " + std::to_string(step) + ", beam " +
              std::to_string(beam) + ": " + what),
        step_(step),
        beam_(beam) {}

  std::size_t step() const noexcept { return step_; }
  std::size_t beam() const noexcept { return beam_; }

 private:
  std::size_t step_;
  std::size_t beam_;
};

// Pipeline failure annotated with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace agic
