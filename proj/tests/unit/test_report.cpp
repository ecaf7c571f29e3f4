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
#include <gtest/gtest.h>

#include "support.hpp"
#include "t2i/fid.hpp"
#include "t2i/report.hpp"
#include "t2i/rprecision.hpp"

namespace t2i {
namespace {

using nlohmann::json;
using testing::error_kind_of;

const CategoryScheme kGender = CategoryScheme::for_axis(BiasAxis::gender);
const CategoryScheme kRace = CategoryScheme::for_axis(BiasAxis::race);

BiasComparison table2_gender() {
  return {BiasAxis::gender,
          {{"Stable Diffusion", table_from_percentages(kGender, {{"Female", 25}, {"Male", 45}}, 30)},
           {"Dall-E Mini", table_from_percentages(kGender, {{"Female", 6}, {"Male", 14}}, 80)}}};
}

BiasComparison table2_race() {
  return {BiasAxis::race,
          {{"Stable Diffusion",
            table_from_percentages(
                kRace, {{"White", 32.5}, {"Black", 8.6}, {"Asian", 7}, {"Hispanic/Latino", 4.8}},
                47)},
           {"Dall-E Mini",
            table_from_percentages(
                kRace, {{"White", 18}, {"Black", 12}, {"Asian", 2}, {"Hispanic/Latino", 1}}, 66)}}};
}

TEST(FormatTest, Percentages) {
  EXPECT_EQ(format_percent(25.0), "25");
  EXPECT_EQ(format_percent(35.714), "35.7");
  EXPECT_EQ(format_percent(64.2857), "64.3");
  EXPECT_EQ(format_percent(9.0566), "9.1");
  EXPECT_EQ(format_percent(0.0), "0");
  EXPECT_EQ(format_percent(-0.01), "0");
  EXPECT_EQ(format_percent(100.0), "100");
}

TEST(FormatTest, MetricPrecision) {
  EXPECT_EQ(format_fid({21.7, std::nullopt}), "21.70");
  EXPECT_EQ(format_fid({21.7, 0.314}), "21.70 ± 0.31");
  EXPECT_EQ(format_rprecision(0.0225), "0.0225");
  EXPECT_EQ(format_rprecision(1.0), "1.0000");
}

TEST(FormatTest, TableFormats) {
  EXPECT_EQ(parse_table_format("markdown"), TableFormat::markdown);
  EXPECT_EQ(parse_table_format("md"), TableFormat::markdown);
  EXPECT_EQ(parse_table_format("csv"), TableFormat::csv);
  EXPECT_EQ(parse_table_format("machine"), TableFormat::machine);
  EXPECT_EQ(error_kind_of([] { parse_table_format("html"); }), ErrorKind::usage);
}

TEST(BiasRenderTest, GenderTableMatchesPublishedLayout) {
  EXPECT_EQ(render_bias(table2_gender(), TableFormat::markdown),
            "| Model | Female (%) | Male (%) | Uncertain (%) |\n"
            "| --- | --- | --- | --- |\n"
            "| Stable Diffusion | 25 (35.7) | 45 (64.3) | 30 |\n"
            "| Dall-E Mini | 6 (30) | 14 (70) | 80 |\n");
}

TEST(BiasRenderTest, RaceTableMatchesPublishedLayout) {
  EXPECT_EQ(render_bias(table2_race(), TableFormat::markdown),
            "| Model | White (%) | Black (%) | Asian (%) | Hispanic/Latino (%) | Uncertain (%) |\n"
            "| --- | --- | --- | --- | --- | --- |\n"
            "| Stable Diffusion | 32.5 (61.3) | 8.6 (16.2) | 7 (13.2) | 4.8 (9.1) | 47 |\n"
            "| Dall-E Mini | 18 (52.9) | 12 (35.3) | 2 (5.9) | 1 (2.9) | 66 |\n");
}

TEST(BiasRenderTest, CsvAndMachine) {
  EXPECT_EQ(render_bias(table2_gender(), TableFormat::csv),
            "model,Female,Male,Uncertain\n"
            "Stable Diffusion,25 (35.7),45 (64.3),30\n"
            "Dall-E Mini,6 (30),14 (70),80\n");
  const json j = json::parse(render_bias(table2_race(), TableFormat::machine));
  EXPECT_EQ(j.at("kind"), "bias");
  EXPECT_EQ(j.at("columns").at(0), "White");
  EXPECT_NEAR(j.at("rows").at(1).at("cells").at("White").at("normalized").get<double>(),
              52.94, 0.01);
}

TEST(BiasRenderTest, AllUncertainRowShowsMissingCells) {
  std::map<std::string, std::string, IdLess> consensus = {{"a", "Uncertain"}, {"b", "Uncertain"}};
  BiasComparison t{BiasAxis::gender, {{"LAFITE", tabulate(consensus, kGender)}}};
  EXPECT_NE(render_bias(t, TableFormat::markdown).find("| LAFITE | 0 (—) | 0 (—) | 100 |"),
            std::string::npos);
}

TEST(BiasRenderTest, MixedAxesAreRejected) {
  BiasComparison t = table2_gender();
  t.rows.push_back(table2_race().rows.front());
  EXPECT_EQ(error_kind_of([&] { render_bias(t, TableFormat::markdown); }), ErrorKind::input);

  json g = table2_gender().rows[0].table.to_json();
  json r = table2_race().rows[0].table.to_json();
  EXPECT_EQ(error_kind_of([&] { render_reports({g, r}, TableFormat::markdown); }),
            ErrorKind::input);
}

FidReport fid_report(const std::string& model, const std::string& dataset,
                     const std::string& axis, std::vector<double> scores) {
  FidReport r;
  r.iteration_scores = std::move(scores);
  r.mean_score = sample_mean(r.iteration_scores);
  r.std_score = sample_std(r.iteration_scores);
  r.model = model;
  r.dataset = dataset;
  r.axis = axis;
  return r;
}

RPrecisionReport rprec_report(const std::string& model, const std::string& dataset,
                              const std::string& axis, double mean) {
  RPrecisionReport r;
  r.per_image_scores = {{"1", mean}};
  r.mean_score = mean;
  r.model = model;
  r.dataset = dataset;
  r.axis = axis;
  return r;
}

TEST(ComparisonRenderTest, ReportsGroupIntoDatasetTables) {
  const std::vector<json> reports = {
      fid_report("Stable Diffusion", "COCO", "face", {21.70}).to_json(),
      rprec_report("Stable Diffusion", "COCO", "face", 0.0225).to_json(),
      fid_report("LAFITE G", "COCO", "motion", {30.0, 31.0}).to_json(),
  };
  EXPECT_EQ(render_reports(reports, TableFormat::markdown),
            "Dataset: COCO\n\n"
            "| Model | FID Face | FID Motion | R-Precision Face | R-Precision Motion |\n"
            "| --- | --- | --- | --- | --- |\n"
            "| Stable Diffusion | 21.70 | — | 0.0225 | — |\n"
            "| LAFITE G | — | 30.50 ± 0.71 | — | — |\n");
  EXPECT_EQ(render_reports(reports, TableFormat::csv),
            "dataset,model,fid_face,fid_motion,rprec_face,rprec_motion\n"
            "COCO,Stable Diffusion,21.70,—,0.0225,—\n"
            "COCO,LAFITE G,—,30.50 ± 0.71,—,—\n");
}

TEST(ComparisonRenderTest, MachineFormatCarriesEveryTable) {
  AuditReport audit;
  audit.pooled = table_from_percentages(kGender, {{"Female", 25}, {"Male", 45}}, 30);
  audit.model = "Stable Diffusion";
  const std::vector<json> reports = {
      fid_report("A", "COCO", "face", {1.0}).to_json(),
      fid_report("A", "Flickr30k", "face", {2.0}).to_json(),
      audit.to_json(),
  };
  const json j = json::parse(render_reports(reports, TableFormat::machine));
  ASSERT_EQ(j.at("tables").size(), 3u);
  EXPECT_EQ(j.at("tables").at(1).at("dataset"), "Flickr30k");
  EXPECT_EQ(j.at("tables").at(2).at("rows").at(0).at("model"), "Stable Diffusion");
  // Rendering is a pure function of its inputs.
  EXPECT_EQ(render_reports(reports, TableFormat::machine),
            render_reports(reports, TableFormat::machine));
}

TEST(ComparisonRenderTest, InputErrors) {
  EXPECT_EQ(error_kind_of([] { render_reports({}, TableFormat::markdown); }), ErrorKind::usage);
  const json dup = fid_report("A", "COCO", "face", {1.0}).to_json();
  EXPECT_EQ(error_kind_of([&] { render_reports({dup, dup}, TableFormat::markdown); }),
            ErrorKind::input);
  EXPECT_EQ(error_kind_of([] { render_reports({json{{"metric", "kid"}}}, TableFormat::csv); }),
            ErrorKind::input);
  const json no_axis = fid_report("A", "COCO", "", {1.0}).to_json();
  EXPECT_EQ(error_kind_of([&] { render_reports({no_axis}, TableFormat::csv); }),
            ErrorKind::input);
}

TEST(ComparisonRenderTest, CsvQuotesSpecialCharacters) {
  const std::vector<json> reports = {fid_report("Model, \"v2\"", "COCO", "face", {1.0}).to_json()};
  EXPECT_NE(render_reports(reports, TableFormat::csv).find("COCO,\"Model, \"\"v2\"\"\",1.00"),
            std::string::npos);
}

}  // namespace
}  // namespace t2i
