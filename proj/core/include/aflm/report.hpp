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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aflm/evaluation.hpp"

namespace aflm {

struct ComparisonCell {
  std::optional<double> value;
  bool best = false;
};

// Rows are arms, columns are metric x class mean.
struct ComparisonTable {
  std::vector<std::string> arms;
  std::vector<std::string> columns;  // "perplexity.mu_pretraining", ...
  std::vector<std::vector<ComparisonCell>> cells;

  std::string to_csv() const;
  // Best cells are bold.
  std::string to_markdown() const;
};

// Perplexity and isotropy: lower is better. BLEU: higher is better.
bool lower_is_better(std::string_view metric);

// Needs at least two reports over the same languages; otherwise throws
// ConfigError, or DataError listing the symmetric difference.
ComparisonTable compare_reports(std::span<const EvalReport> reports);

// Grouped bar chart (groups = class means, bars = arms) for one metric.
std::string bar_chart_svg(const ComparisonTable& table, std::string_view metric);

}  // namespace aflm
