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

// JSON conversions shared by the config and checkpoint code.

#include <string>
#include <vector>

#include "json.hpp"

#include "aflm/model.hpp"
#include "aflm/training.hpp"

namespace aflm::detail {

using nlohmann::json;

// Reads typed fields from a JSON object, recording problems instead of
// throwing so that every error can be reported at once.
class FieldReader {
 public:
  FieldReader(const json& object, std::string prefix, std::vector<std::string>& problems);

  template <typename T>
  void read(const char* key, T& out);
  template <typename T>
  void read_optional(const char* key, std::optional<T>& out);
  const json* child(const char* key);
  // Reports keys that were never read.
  void finish();

 private:
  const json& object_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::vector<std::string> seen_;
};

template <typename T>
void FieldReader::read(const char* key, T& out) {
  seen_.emplace_back(key);
  if (!object_.is_object() || !object_.contains(key)) return;
  try {
    out = object_.at(key).get<T>();
  } catch (const json::exception&) {
    problems_.push_back(prefix_ + key + ": wrong type (" + object_.at(key).dump() + ")");
  }
}

template <typename T>
void FieldReader::read_optional(const char* key, std::optional<T>& out) {
  seen_.emplace_back(key);
  if (!object_.is_object() || !object_.contains(key)) return;
  if (object_.at(key).is_null()) {
    out.reset();
    return;
  }
  try {
    out = object_.at(key).get<T>();
  } catch (const json::exception&) {
    problems_.push_back(prefix_ + key + ": wrong type (" + object_.at(key).dump() + ")");
  }
}

json model_config_json(const ModelConfig& config);
void read_model_config(FieldReader& reader, ModelConfig& config);

json schedule_json(const TrainingSchedule& schedule);
void read_schedule(const json& object, const std::string& prefix, TrainingSchedule& schedule,
                   std::vector<std::string>& problems);

}  // namespace aflm::detail
