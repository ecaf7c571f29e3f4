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
#ifndef T2I_BIAS_HPP
#define T2I_BIAS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "t2i/adapters.hpp"
#include "t2i/ingest.hpp"

namespace t2i {

enum class BiasAxis { gender, race };

std::string_view to_string(BiasAxis axis);
BiasAxis parse_bias_axis(std::string_view text);

inline constexpr std::string_view kUncertain = "Uncertain";
inline constexpr std::size_t kShippedSuiteSize = 88;
inline constexpr std::size_t kImagesPerPrompt = 16;
inline constexpr std::size_t kEvaluatorsPerImage = 5;

struct CategoryScheme {
  BiasAxis axis = BiasAxis::gender;
  std::vector<std::string> categories;
  std::string uncertain_label = std::string(kUncertain);

  // Female, Male / White, Black, Asian, Hispanic/Latino.
  static CategoryScheme for_axis(BiasAxis axis);

  bool allows(std::string_view label) const;
  std::vector<std::string> labels() const;  // categories then uncertain
  void validate() const;
  nlohmann::json to_json() const;
  static CategoryScheme from_json(BiasAxis axis, const nlohmann::json& j);
};

struct PromptSuite {
  BiasAxis axis = BiasAxis::gender;
  std::vector<std::string> prompts;
  CategoryScheme scheme;
  std::vector<std::string> warnings;
};

// File: {"axis", "scheme":{"categories","uncertain_label"}, "prompts":[...]}.
// Duplicate prompts are a validation error; a count other than 88 only
// warns, so custom suites of any size >= 1 load.
PromptSuite load_prompt_suite(const std::filesystem::path& path);
PromptSuite parse_prompt_suite(const nlohmann::json& doc, std::string_view origin);

// Directory holding the shipped gender.json and race.json suites.
std::filesystem::path default_prompt_dir();

struct GeneratorReceipt {
  std::map<std::string, std::vector<std::string>> paths_by_prompt;
  std::map<std::string, double> seconds_by_item;
  std::uint64_t seed = 0;
  std::string adapter;
  std::size_t per_prompt = 0;
  std::vector<std::size_t> completed_prompts;  // prompt indices

  nlohmann::json to_json() const;
  static GeneratorReceipt from_json(const nlohmann::json& j);
};

std::string audit_image_id(std::size_t prompt_index, std::size_t image_index);
// Parses "<prompt_idx>_<img_idx>"; nullopt for other ids.
std::optional<std::size_t> prompt_index_of(std::string_view image_id);

// Generates per_prompt images for each prompt, one adapter call per prompt.
// The receipt (<out_dir>/receipt.json) is rewritten after every prompt, so a
// failed run keeps its finished prompts and a rerun skips them. Images land
// in <out_dir>/images/; the manifest root is <out_dir>.
ImageManifest generate_audit_images(const PromptSuite& suite, AdapterClient& generator,
                                    std::size_t per_prompt, std::uint64_t seed,
                                    const std::filesystem::path& out_dir,
                                    const std::string& adapter_label = "adapter",
                                    std::map<std::string, std::string> params = {});

struct Annotation {
  std::string evaluator_id;
  std::string image_id;
  BiasAxis axis = BiasAxis::gender;
  std::string label;
  std::string timestamp;  // UTC, ISO-8601 "YYYY-MM-DDTHH:MM:SS[.fff]Z"

  bool operator==(const Annotation&) const = default;
  nlohmann::json to_json() const;
  static Annotation from_json(const nlohmann::json& j);
};

std::vector<Annotation> read_annotations(const std::filesystem::path& path);
std::string annotations_to_jsonl(const std::vector<Annotation>& annotations);

struct ConsensusResult {
  std::map<std::string, std::string, IdLess> consensus;
  std::vector<std::string> missing;          // expected ids with zero annotations
  std::vector<std::string> under_annotated;  // fewer than n_evaluators labels
};

// Latest label per (image, evaluator) by timestamp, then plurality per
// image; a tie among the top labels yields Uncertain. Labels outside the
// scheme are a validation error.
ConsensusResult aggregate_labels(const std::vector<Annotation>& annotations,
                                 const CategoryScheme& scheme,
                                 std::size_t n_evaluators = kEvaluatorsPerImage,
                                 const std::vector<std::string>& expected_ids = {});

struct BiasTable {
  BiasAxis axis = BiasAxis::gender;
  std::vector<std::string> categories;
  std::map<std::string, double> raw_pct;
  double uncertain_pct = 0.0;
  std::optional<std::map<std::string, double>> normalized_pct;  // absent when all uncertain
  std::size_t n_images = 0;                                     // 0 when built from percentages
  bool all_uncertain = false;
  double sum_residual = 0.0;  // sum(raw) + uncertain - 100
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static BiasTable from_json(const nlohmann::json& j);
};

// normalized_c = raw_c / (100 - uncertain) * 100.
BiasTable tabulate(const std::map<std::string, std::string, IdLess>& consensus,
                   const CategoryScheme& scheme);

// Same normalization applied to published percentages. Residuals beyond
// 0.2 points are recorded as a warning, not rejected.
BiasTable table_from_percentages(const CategoryScheme& scheme,
                                 const std::map<std::string, double>& raw_pct,
                                 double uncertain_pct);

struct BiasDeviation {
  double target = 0.0;  // 100 / |categories|
  std::map<std::string, double> per_category_dev;
  double max_abs_dev = 0.0;
};

BiasDeviation bias_deviation(const BiasTable& table);

struct AuditReport {
  BiasTable pooled;
  std::map<std::size_t, BiasTable> per_prompt;
  ConsensusResult consensus;
  std::string model;

  nlohmann::json to_json() const;
};

// aggregate_labels + tabulate (pooled and per prompt) + deviation.
AuditReport build_audit_report(const std::vector<Annotation>& annotations,
                               const CategoryScheme& scheme,
                               std::size_t n_evaluators = kEvaluatorsPerImage,
                               const std::vector<std::string>& expected_ids = {});

}  // namespace t2i

#endif  // T2I_BIAS_HPP
