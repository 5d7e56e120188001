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


#include "aflm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "aflm/errors.hpp"

namespace aflm {

namespace {

constexpr const char* kMetrics[] = {"perplexity", "isotropy", "bleu"};
constexpr const char* kClasses[] = {"mu_pretraining", "mu_adapting", "mu_other", "mu_overall"};

std::optional<double> pick(const MetricMeans& m, std::string_view metric) {
  if (metric == "perplexity") return m.perplexity;
  if (metric == "isotropy") return m.isotropy;
  return m.bleu;
}

const MetricMeans& pick(const ClassAggregates& a, std::string_view cls) {
  if (cls == "mu_pretraining") return a.mu_pretraining;
  if (cls == "mu_adapting") return a.mu_adapting;
  if (cls == "mu_other") return a.mu_other;
  return a.mu_overall;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

bool lower_is_better(std::string_view metric) { return metric != "bleu"; }

ComparisonTable compare_reports(std::span<const EvalReport> reports) {
  if (reports.size() < 2) throw ConfigError("compare needs at least two reports");
  const auto first = reports.front().lang_ids();
  const std::set<std::string> reference(first.begin(), first.end());
  for (std::size_t r = 1; r < reports.size(); ++r) {
    const auto ids = reports[r].lang_ids();
    const std::set<std::string> other(ids.begin(), ids.end());
    std::vector<std::string> diff;
    std::set_symmetric_difference(reference.begin(), reference.end(), other.begin(), other.end(),
                                  std::back_inserter(diff));
    if (!diff.empty()) {
      std::string msg = "reports '" + reports.front().model_tag + "' and '" + reports[r].model_tag +
                        "' cover different languages; symmetric difference:";
      for (const auto& d : diff) msg += " " + d;
      throw DataError(msg);
    }
  }
  ComparisonTable table;
  for (const auto* metric : kMetrics) {
    for (const auto* cls : kClasses) table.columns.push_back(std::string(metric) + "." + cls);
  }
  for (const auto& report : reports) {
    table.arms.push_back(report.model_tag);
    std::vector<ComparisonCell> row;
    for (const auto* metric : kMetrics) {
      for (const auto* cls : kClasses) row.push_back({pick(pick(report.aggregates, cls), metric), false});
    }
    table.cells.push_back(std::move(row));
  }
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const bool lower = lower_is_better(table.columns[c].substr(0, table.columns[c].find('.')));
    std::optional<double> best;
    for (const auto& row : table.cells) {
      const auto& v = row[c].value;
      if (!v || std::isnan(*v)) continue;
      if (!best || (lower ? *v < *best : *v > *best)) best = v;
    }
    if (!best) continue;
    for (auto& row : table.cells) {
      if (row[c].value && *row[c].value == *best) row[c].best = true;
    }
  }
  return table;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "arm";
  for (const auto& c : columns) out << ',' << c << ',' << c << ".best";
  out << '\n';
  for (std::size_t r = 0; r < arms.size(); ++r) {
    out << arms[r];
    for (const auto& cell : cells[r]) {
      out << ',' << (cell.value ? fmt(*cell.value) : "") << ',' << (cell.best ? 1 : 0);
    }
    out << '\n';
  }
  return out.str();
}

std::string ComparisonTable::to_markdown() const {
  std::ostringstream out;
  out << "| arm |";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---:|";
  out << '\n';
  for (std::size_t r = 0; r < arms.size(); ++r) {
    out << "| " << arms[r] << " |";
    for (const auto& cell : cells[r]) {
      if (!cell.value) {
        out << " - |";
      } else if (cell.best) {
        out << " **" << fmt(*cell.value) << "** |";
      } else {
        out << ' ' << fmt(*cell.value) << " |";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string bar_chart_svg(const ComparisonTable& table, std::string_view metric) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c].substr(0, table.columns[c].find('.')) == metric) cols.push_back(c);
  }
  if (cols.empty()) throw ConfigError("unknown metric '" + std::string(metric) + "'");
  double max_value = 0.0;
  for (const auto& row : table.cells) {
    for (const auto c : cols) {
      if (row[c].value && std::isfinite(*row[c].value)) max_value = std::max(max_value, *row[c].value);
    }
  }
  if (max_value <= 0.0) max_value = 1.0;

  static constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                             "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
  const double width = 720;
  const double height = 360;
  const double left = 60;
  const double right = 20;
  const double top = 40;
  const double bottom = 70;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double group_w = plot_w / static_cast<double>(cols.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, table.arms.size()));

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(metric) << (lower_is_better(metric) ? " (lower is better)" : " (higher is better)")
      << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = max_value * tick / 4.0;
    const double y = top + plot_h - plot_h * tick / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v)
        << "</text>\n";
  }
  for (std::size_t g = 0; g < cols.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t a = 0; a < table.arms.size(); ++a) {
      const auto& cell = table.cells[a][cols[g]];
      if (!cell.value || !std::isfinite(*cell.value)) continue;
      const double h = plot_h * std::max(0.0, *cell.value) / max_value;
      const double x = gx + bar_w * static_cast<double>(a);
      svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w * 0.95
          << "\" height=\"" << h << "\" fill=\"" << kPalette[a % 8] << "\""
          << (cell.best ? " stroke=\"black\" stroke-width=\"2\"" : "") << "><title>"
          << escape_xml(table.arms[a]) << ": " << fmt(*cell.value) << "</title></rect>\n";
    }
    const auto& col = table.columns[cols[g]];
    svg << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\">" << escape_xml(col.substr(col.find('.') + 1)) << "</text>\n";
  }
  for (std::size_t a = 0; a < table.arms.size(); ++a) {
    const double x = left + 110.0 * static_cast<double>(a);
    const double y = height - 22;
    svg << "<rect x=\"" << x << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[a % 8] << "\"/>\n";
    svg << "<text x=\"" << x + 16 << "\" y=\"" << y << "\">" << escape_xml(table.arms[a])
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace aflm
