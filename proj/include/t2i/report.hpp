// Copyright 2026 The T2I Audit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef T2I_REPORT_HPP
#define T2I_REPORT_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "t2i/bias.hpp"

namespace t2i {

enum class TableFormat { markdown, csv, machine };

TableFormat parse_table_format(std::string_view text);

inline constexpr std::string_view kMissingCell = "—";

struct MetricCell {
  double mean = 0.0;
  std::optional<double> std;  // set when more than one iteration
};

struct ComparisonRow {
  std::string model;
  std::optional<MetricCell> fid_face;
  std::optional<MetricCell> fid_motion;
  std::optional<MetricCell> rprec_face;
  std::optional<MetricCell> rprec_motion;
};

struct ComparisonTable {
  std::string dataset;
  std::vector<ComparisonRow> rows;  // first-seen model order
};

struct BiasRow {
  std::string model;
  BiasTable table;
};

struct BiasComparison {
  BiasAxis axis = BiasAxis::gender;
  std::vector<BiasRow> rows;
};

// One decimal, trailing ".0" dropped: 25.0 -> "25", 35.71 -> "35.7".
std::string format_percent(double value);
std::string format_fid(const MetricCell& cell);  // "21.70" or "21.70 ± 0.31"
std::string format_rprecision(double value);     // "0.0225"

// Published column order: Female, Male / White, Black, Asian, Hispanic/Latino.
std::vector<std::string> bias_column_order(const BiasTable& table);

std::string render_comparison(const ComparisonTable& table, TableFormat format);
std::string render_bias(const BiasComparison& table, TableFormat format);

// Groups FID / R-Precision reports into one table per dataset and bias
// reports into one table; mixed bias axes are an input error, an empty list
// a usage error.
std::string render_reports(const std::vector<nlohmann::json>& reports, TableFormat format);

}  // namespace t2i

#endif  // T2I_REPORT_HPP
