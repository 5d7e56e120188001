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

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

namespace aflm {

// Dense row-major matrix. Vectors (norm gains) are stored as 1 x n.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{0})
      : rows(r), cols(c), data(r * c, fill) {}

  std::size_t size() const noexcept { return data.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  void fill(T value) { std::fill(data.begin(), data.end(), value); }

  bool same_shape(const Matrix& other) const noexcept {
    return rows == other.rows && cols == other.cols;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Byte-level equality; distinguishes -0.0 from 0.0 and compares NaN payloads.
template <typename T>
bool bitwise_equal(const Matrix<T>& a, const Matrix<T>& b) noexcept {
  return a.same_shape(b) &&
         (a.data.empty() ||
          std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(T)) == 0);
}

}  // namespace aflm
