// Copyright 2026 The aflm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace aflm {

// Base of every error raised by the library. The CLI maps ConfigError to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (bad schedule, mismatched special
// tokens, failed config validation, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in gradients or the loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated, or mismatched checkpoint.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Checkpoint written by an unsupported format major version.
class VersionError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

// Checkpoint paired with a tokenizer other than the one it was trained with.
class TokenizerMismatchError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

// Stage ordering or orchestration failure.
class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace aflm
