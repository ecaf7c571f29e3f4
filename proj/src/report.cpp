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
#include "t2i/report.hpp"

#include <algorithm>
#include <iterator>
#include <map>

#include "fmt/format.h"
#include "t2i/error.hpp"
#include "t2i/fid.hpp"
#include "t2i/rprecision.hpp"

namespace t2i {

using nlohmann::json;

TableFormat parse_table_format(std::string_view text) {
  if (text == "markdown" || text == "md") return TableFormat::markdown;
  if (text == "csv") return TableFormat::csv;
  if (text == "machine" || text == "json") return TableFormat::machine;
  throw Error(ErrorKind::usage,
              "unknown format '" + std::string(text) + "' (expected markdown|csv|machine)");
}

std::string format_percent(double value) {
  std::string s = fmt::format("{:.1f}", value);
  if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
  if (s == "-0") s = "0";
  return s;
}

std::string format_fid(const MetricCell& cell) {
  if (cell.std) return fmt::format("{:.2f} ± {:.2f}", cell.mean, *cell.std);
  return fmt::format("{:.2f}", cell.mean);
}

std::string format_rprecision(double value) { return fmt::format("{:.4f}", value); }

std::vector<std::string> bias_column_order(const BiasTable& table) {
  static const std::vector<std::string> gender = {"Female", "Male"};
  static const std::vector<std::string> race = {"White", "Black", "Asian", "Hispanic/Latino"};
  const auto& published = table.axis == BiasAxis::gender ? gender : race;
  std::vector<std::string> out;
  for (const auto& c : published) {
    if (std::find(table.categories.begin(), table.categories.end(), c) != table.categories.end()) {
      out.push_back(c);
    }
  }
  // Custom schemes keep their own order after the published categories.
  for (const auto& c : table.categories) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_grid(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows, TableFormat format) {
  std::string out;
  if (format == TableFormat::csv) {
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_field(cells[i]);
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
  auto line = [&out](const std::vector<std::string>& cells) {
    out += '|';
    for (const auto& c : cells) out += ' ' + c + " |";
    out += '\n';
  };
  line(header);
  out += '|';
  for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
  out += '\n';
  for (const auto& r : rows) line(r);
  return out;
}

json cell_json(const std::optional<MetricCell>& c) {
  if (!c) return nullptr;
  return json{{"mean", c->mean}, {"std", c->std ? json(*c->std) : json(nullptr)}};
}

std::string cell_text(const std::optional<MetricCell>& c, bool fid) {
  if (!c) return std::string(kMissingCell);
  return fid ? format_fid(*c) : format_rprecision(c->mean);
}

json comparison_json(const ComparisonTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"model", r.model},
                    {"fid_face", cell_json(r.fid_face)},
                    {"fid_motion", cell_json(r.fid_motion)},
                    {"rprec_face", cell_json(r.rprec_face)},
                    {"rprec_motion", cell_json(r.rprec_motion)}});
  }
  return json{{"kind", "comparison"},
              {"dataset", table.dataset},
              {"columns", {"fid_face", "fid_motion", "rprec_face", "rprec_motion"}},
              {"rows", rows}};
}

json bias_json(const BiasComparison& table) {
  json rows = json::array();
  std::vector<std::string> columns;
  for (const auto& r : table.rows) {
    columns = bias_column_order(r.table);
    json cells = json::object();
    for (const auto& c : columns) {
      json norm = nullptr;
      if (r.table.normalized_pct) norm = r.table.normalized_pct->at(c);
      cells[c] = {{"raw", r.table.raw_pct.at(c)}, {"normalized", norm}};
    }
    rows.push_back({{"model", r.model}, {"cells", cells}, {"uncertain", r.table.uncertain_pct}});
  }
  return json{{"kind", "bias"}, {"axis", to_string(table.axis)}, {"columns", columns}, {"rows", rows}};
}

}  // namespace

std::string render_comparison(const ComparisonTable& table, TableFormat format) {
  if (format == TableFormat::machine) return comparison_json(table).dump(2) + "\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : table.rows) {
    std::vector<std::string> cells{r.model};
    if (format == TableFormat::csv) cells.insert(cells.begin(), table.dataset);
    cells.push_back(cell_text(r.fid_face, true));
    cells.push_back(cell_text(r.fid_motion, true));
    cells.push_back(cell_text(r.rprec_face, false));
    cells.push_back(cell_text(r.rprec_motion, false));
    rows.push_back(std::move(cells));
  }
  if (format == TableFormat::csv) {
    return render_grid({"dataset", "model", "fid_face", "fid_motion", "rprec_face", "rprec_motion"},
                       rows, format);
  }
  std::string out;
  if (!table.dataset.empty()) out += "Dataset: " + table.dataset + "\n\n";
  return out + render_grid({"Model", "FID Face", "FID Motion", "R-Precision Face",
                            "R-Precision Motion"},
                           rows, format);
}

std::string render_bias(const BiasComparison& table, TableFormat format) {
  for (const auto& r : table.rows) {
    if (r.table.axis != table.axis) {
      throw Error(ErrorKind::input, "bias table for '" + r.model + "' is on axis " +
                                        std::string(to_string(r.table.axis)) + ", expected " +
                                        std::string(to_string(table.axis)));
    }
  }
  if (format == TableFormat::machine) return bias_json(table).dump(2) + "\n";
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : table.rows) {
    const auto order = bias_column_order(r.table);
    if (!columns.empty() && order != columns) {
      throw Error(ErrorKind::input, "bias tables use different category schemes");
    }
    columns = order;
    std::vector<std::string> cells{r.model};
    for (const auto& c : columns) {
      const std::string norm = r.table.normalized_pct
                                   ? format_percent(r.table.normalized_pct->at(c))
                                   : std::string(kMissingCell);
      cells.push_back(format_percent(r.table.raw_pct.at(c)) + " (" + norm + ")");
    }
    cells.push_back(format_percent(r.table.uncertain_pct));
    rows.push_back(std::move(cells));
  }
  std::vector<std::string> header{format == TableFormat::csv ? "model" : "Model"};
  for (const auto& c : columns) header.push_back(format == TableFormat::csv ? c : c + " (%)");
  header.push_back(format == TableFormat::csv ? "Uncertain" : "Uncertain (%)");
  return render_grid(header, rows, format);
}

namespace {

std::string model_name(const json& doc) {
  std::string m = doc.value("model", "");
  return m.empty() ? "(unnamed)" : m;
}

ComparisonRow& row_for(ComparisonTable& table, const std::string& model) {
  for (auto& r : table.rows) {
    if (r.model == model) return r;
  }
  table.rows.push_back(ComparisonRow{model, {}, {}, {}, {}});
  return table.rows.back();
}

void place(std::optional<MetricCell>& slot, MetricCell cell, const std::string& what) {
  if (slot) throw Error(ErrorKind::input, "two reports fill the same cell (" + what + ")");
  slot = cell;
}

}  // namespace

std::string render_reports(const std::vector<json>& reports, TableFormat format) {
  if (reports.empty()) throw Error(ErrorKind::usage, "no report files given");
  std::vector<ComparisonTable> metric_tables;
  std::optional<BiasComparison> bias;

  for (const json& doc : reports) {
    const std::string metric = doc.value("metric", doc.contains("raw_pct") ? "bias_table" : "");
    const std::string model = model_name(doc);
    if (metric == "bias" || metric == "bias_table") {
      BiasTable t = BiasTable::from_json(metric == "bias" ? doc.at("pooled") : doc);
      if (!bias) bias = BiasComparison{t.axis, {}};
      if (t.axis != bias->axis) {
        throw Error(ErrorKind::input, "bias reports mix the " + std::string(to_string(bias->axis)) +
                                          " and " + std::string(to_string(t.axis)) + " axes");
      }
      bias->rows.push_back(BiasRow{model, std::move(t)});
      continue;
    }
    std::string dataset, axis;
    MetricCell cell;
    bool fid = false;
    if (metric == "fid") {
      const FidReport r = FidReport::from_json(doc);
      dataset = r.dataset;
      axis = r.axis;
      cell.mean = r.mean_score;
      if (r.iteration_scores.size() > 1) cell.std = r.std_score;
      fid = true;
    } else if (metric == "r_precision_paper") {
      const RPrecisionReport r = RPrecisionReport::from_json(doc);
      dataset = r.dataset;
      axis = r.axis;
      cell.mean = r.mean_score;
    } else {
      throw Error(ErrorKind::input, "unrecognized report (metric '" + metric + "')");
    }
    if (axis != "face" && axis != "motion") {
      throw Error(ErrorKind::input, "report for '" + model + "' has axis '" + axis +
                                        "'; comparison columns are face and motion");
    }
    auto it = std::find_if(metric_tables.begin(), metric_tables.end(),
                           [&](const ComparisonTable& t) { return t.dataset == dataset; });
    if (it == metric_tables.end()) {
      metric_tables.push_back(ComparisonTable{dataset, {}});
      it = std::prev(metric_tables.end());
    }
    ComparisonRow& row = row_for(*it, model);
    const std::string what = model + " " + (fid ? "fid_" : "rprec_") + axis;
    if (fid) {
      place(axis == "face" ? row.fid_face : row.fid_motion, cell, what);
    } else {
      place(axis == "face" ? row.rprec_face : row.rprec_motion, cell, what);
    }
  }

  if (format == TableFormat::machine) {
    json tables = json::array();
    for (const auto& t : metric_tables) tables.push_back(comparison_json(t));
    if (bias) {
      render_bias(*bias, TableFormat::markdown);  // scheme checks
      tables.push_back(bias_json(*bias));
    }
    return json{{"tables", tables}}.dump(2) + "\n";
  }
  std::string out;
  for (const auto& t : metric_tables) {
    if (!out.empty()) out += '\n';
    out += render_comparison(t, format);
  }
  if (bias) {
    if (!out.empty()) out += '\n';
    out += render_bias(*bias, format);
  }
  return out;
}

}  // namespace t2i
