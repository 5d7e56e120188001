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

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace aflm {

// SplitMix64 finalizer over the pair; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Seeded generator with platform-independent derived distributions (the
// standard library's distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

  std::string state() const;
  void set_state(std::string_view state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aflm
