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


#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "aflm/errors.hpp"
#include "aflm/report.hpp"

namespace {

using namespace aflm;

EvalReport make_report(const std::string& tag, double ppl_scale, double bleu) {
  EvalReport r;
  r.model_tag = tag;
  r.rows.push_back({"en", LanguageClass::pretraining, {10.0 * ppl_scale, 0.3, std::nullopt}});
  r.rows.push_back({"xa", LanguageClass::adapting, {40.0 * ppl_scale, 0.5, bleu}});
  r.rows.push_back({"xo", LanguageClass::other, {60.0 * ppl_scale, 0.4, bleu / 2}});
  r.aggregate();
  return r;
}

std::size_t column(const ComparisonTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i] == name) return i;
  }
  ADD_FAILURE() << "no column " << name;
  return 0;
}

TEST(Compare, ColumnsAreMetricsTimesClasses) {
  const std::vector<EvalReport> rs{make_report("BA", 1.0, 0.2), make_report("AFA", 0.9, 0.3)};
  const auto t = compare_reports(rs);
  EXPECT_EQ(t.columns.size(), 12u);
  EXPECT_EQ(t.arms, (std::vector<std::string>{"BA", "AFA"}));
  EXPECT_EQ(t.cells.size(), 2u);
  EXPECT_EQ(t.cells[0].size(), 12u);
}

TEST(Compare, IdenticalReportsTie) {
  const std::vector<EvalReport> rs{make_report("a", 1.0, 0.2), make_report("b", 1.0, 0.2)};
  const auto t = compare_reports(rs);
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (!t.cells[0][c].value) continue;
    EXPECT_TRUE(t.cells[0][c].best) << t.columns[c];
    EXPECT_TRUE(t.cells[1][c].best) << t.columns[c];
  }
}

TEST(Compare, DirectionPerMetric) {
  auto a = make_report("a", 1.0, 0.2);
  auto b = make_report("b", 1.0, 0.3);
  a.aggregates.mu_overall.perplexity = 31.0;
  b.aggregates.mu_overall.perplexity = 29.0;
  const std::vector<EvalReport> rs{a, b};
  const auto t = compare_reports(rs);
  const auto ppl = column(t, "perplexity.mu_overall");
  EXPECT_FALSE(t.cells[0][ppl].best);
  EXPECT_TRUE(t.cells[1][ppl].best);
  const auto bl = column(t, "bleu.mu_adapting");
  EXPECT_TRUE(t.cells[1][bl].best);
  EXPECT_FALSE(t.cells[0][bl].best);
  EXPECT_TRUE(lower_is_better("isotropy"));
  EXPECT_FALSE(lower_is_better("bleu"));
}

TEST(Compare, MissingValuesNeverBest) {
  const std::vector<EvalReport> rs{make_report("a", 1.0, 0.2), make_report("b", 1.0, 0.3)};
  const auto t = compare_reports(rs);
  const auto c = column(t, "bleu.mu_pretraining");
  EXPECT_FALSE(t.cells[0][c].value.has_value());
  EXPECT_FALSE(t.cells[0][c].best);
}

TEST(Compare, Errors) {
  const std::vector<EvalReport> one{make_report("a", 1.0, 0.2)};
  EXPECT_THROW(compare_reports(one), ConfigError);
  auto b = make_report("b", 1.0, 0.2);
  b.rows.pop_back();
  b.rows.push_back({"zz", LanguageClass::other, {1.0, 0.1, std::nullopt}});
  const std::vector<EvalReport> rs{make_report("a", 1.0, 0.2), b};
  try {
    compare_reports(rs);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("xo"), std::string::npos) << msg;
    EXPECT_NE(msg.find("zz"), std::string::npos) << msg;
  }
}

TEST(Compare, RenderedOutputs) {
  const std::vector<EvalReport> rs{make_report("BA", 1.0, 0.2), make_report("AFA", 0.9, 0.3)};
  const auto t = compare_reports(rs);
  const auto csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, 4), "arm,");
  EXPECT_NE(csv.find("perplexity.mu_overall.best"), std::string::npos);
  EXPECT_NE(t.to_markdown().find("**"), std::string::npos);
  const auto svg = bar_chart_svg(t, "perplexity");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("AFA"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_THROW(bar_chart_svg(t, "accuracy"), ConfigError);
}

}  // namespace
