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
#include "t2i/bias.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <tuple>

#include "t2i/error.hpp"
#include "t2i/fileio.hpp"

#ifndef T2I_DATA_DIR
#define T2I_DATA_DIR "data"
#endif

namespace t2i {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(BiasAxis axis) {
  return axis == BiasAxis::gender ? "gender" : "race";
}

BiasAxis parse_bias_axis(std::string_view text) {
  if (text == "gender") return BiasAxis::gender;
  if (text == "race") return BiasAxis::race;
  throw Error(ErrorKind::usage, "unknown bias axis '" + std::string(text) +
                                    "' (expected gender|race)");
}

CategoryScheme CategoryScheme::for_axis(BiasAxis axis) {
  CategoryScheme s;
  s.axis = axis;
  if (axis == BiasAxis::gender) {
    s.categories = {"Female", "Male"};
  } else {
    s.categories = {"White", "Black", "Asian", "Hispanic/Latino"};
  }
  return s;
}

bool CategoryScheme::allows(std::string_view label) const {
  return label == uncertain_label ||
         std::find(categories.begin(), categories.end(), label) != categories.end();
}

std::vector<std::string> CategoryScheme::labels() const {
  std::vector<std::string> out = categories;
  out.push_back(uncertain_label);
  return out;
}

void CategoryScheme::validate() const {
  if (categories.empty()) throw Error(ErrorKind::validation, "scheme has no categories");
  if (std::find(categories.begin(), categories.end(), uncertain_label) != categories.end()) {
    throw Error(ErrorKind::validation, "uncertain label is listed as a category");
  }
  std::set<std::string> unique(categories.begin(), categories.end());
  if (unique.size() != categories.size()) {
    throw Error(ErrorKind::validation, "scheme repeats a category");
  }
}

json CategoryScheme::to_json() const {
  return json{{"axis", to_string(axis)},
              {"categories", categories},
              {"uncertain_label", uncertain_label}};
}

CategoryScheme CategoryScheme::from_json(BiasAxis axis, const json& j) {
  CategoryScheme s = for_axis(axis);
  if (j.contains("categories")) s.categories = j.at("categories").get<std::vector<std::string>>();
  s.uncertain_label = j.value("uncertain_label", std::string(kUncertain));
  s.validate();
  return s;
}

PromptSuite parse_prompt_suite(const json& doc, std::string_view origin) {
  PromptSuite suite;
  try {
    suite.axis = parse_bias_axis(doc.at("axis").get<std::string>());
    suite.scheme = CategoryScheme::from_json(suite.axis, doc.value("scheme", json::object()));
    suite.prompts = doc.at("prompts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string(origin) + ": " + e.what());
  }
  if (suite.prompts.empty()) {
    throw Error(ErrorKind::validation, std::string(origin) + ": suite has no prompts");
  }
  std::set<std::string_view> seen;
  for (const auto& p : suite.prompts) {
    if (p.empty()) throw Error(ErrorKind::validation, std::string(origin) + ": empty prompt");
    if (!seen.insert(p).second) {
      throw Error(ErrorKind::validation,
                  std::string(origin) + ": duplicate prompt \"" + p + "\"");
    }
  }
  if (suite.prompts.size() != kShippedSuiteSize) {
    suite.warnings.push_back(std::string(origin) + ": " + std::to_string(suite.prompts.size()) +
                             " prompts (shipped suites have " +
                             std::to_string(kShippedSuiteSize) + ")");
  }
  return suite;
}

PromptSuite load_prompt_suite(const fs::path& path) {
  return parse_prompt_suite(read_json(path), path.string());
}

fs::path default_prompt_dir() {
  if (const char* env = std::getenv("T2I_PROMPT_DIR"); env && *env) return fs::path(env);
  return fs::path(T2I_DATA_DIR) / "prompts";
}

json GeneratorReceipt::to_json() const {
  return json{{"seed", seed},
              {"adapter", adapter},
              {"per_prompt", per_prompt},
              {"completed_prompts", completed_prompts},
              {"paths_by_prompt", paths_by_prompt},
              {"seconds_by_item", seconds_by_item}};
}

GeneratorReceipt GeneratorReceipt::from_json(const json& j) {
  try {
    GeneratorReceipt r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.adapter = j.value("adapter", "");
    r.per_prompt = j.at("per_prompt").get<std::size_t>();
    r.completed_prompts = j.value("completed_prompts", std::vector<std::size_t>{});
    r.paths_by_prompt =
        j.value("paths_by_prompt", std::map<std::string, std::vector<std::string>>{});
    r.seconds_by_item = j.value("seconds_by_item", std::map<std::string, double>{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad generator receipt: ") + e.what());
  }
}

std::string audit_image_id(std::size_t prompt_index, std::size_t image_index) {
  return std::to_string(prompt_index) + "_" + std::to_string(image_index);
}

std::optional<std::size_t> prompt_index_of(std::string_view image_id) {
  const auto us = image_id.find('_');
  if (us == std::string_view::npos || us == 0) return std::nullopt;
  std::size_t value = 0;
  for (char c : image_id.substr(0, us)) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

namespace {

ManifestEntry audit_entry(const fs::path& out_dir, std::size_t prompt_index,
                          std::size_t image_index, const std::string& prompt,
                          const std::string& path) {
  // Receipt paths are relative to out_dir; fresh adapter paths arrive absolute.
  const fs::path given(path);
  fs::path rel = given.is_relative() ? given.lexically_normal()
                                     : given.lexically_normal().lexically_relative(out_dir);
  if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") {
    throw Error(ErrorKind::protocol, "generator wrote " + path + " outside " + out_dir.string());
  }
  return ManifestEntry{audit_image_id(prompt_index, image_index),
                       rel.generic_string(),
                       {prompt},
                       {"prompt_index=" + std::to_string(prompt_index),
                        "image_index=" + std::to_string(image_index)}};
}

}  // namespace

ImageManifest generate_audit_images(const PromptSuite& suite, AdapterClient& generator,
                                    std::size_t per_prompt, std::uint64_t seed,
                                    const fs::path& out, const std::string& adapter_label,
                                    std::map<std::string, std::string> params) {
  if (per_prompt == 0) throw Error(ErrorKind::usage, "per_prompt must be >= 1");
  const fs::path out_dir = fs::absolute(out).lexically_normal();
  const fs::path image_dir = out_dir / "images";
  fs::create_directories(image_dir);
  const fs::path receipt_path = out_dir / "receipt.json";

  GeneratorReceipt receipt;
  receipt.seed = seed;
  receipt.per_prompt = per_prompt;
  receipt.adapter = adapter_label;
  if (fs::exists(receipt_path)) {
    GeneratorReceipt prior = GeneratorReceipt::from_json(read_json(receipt_path));
    if (prior.seed != seed || prior.per_prompt != per_prompt) {
      throw Error(ErrorKind::conflict, receipt_path.string() +
                                           " belongs to a run with a different seed or "
                                           "per_prompt; use a fresh output directory");
    }
    receipt = std::move(prior);
  }
  std::set<std::size_t> done(receipt.completed_prompts.begin(), receipt.completed_prompts.end());

  ImageManifest manifest;
  manifest.source_name = "audit-" + std::string(to_string(suite.axis));
  manifest.axis = ManifestAxis::bias;
  manifest.root = out_dir.string();

  for (std::size_t p = 0; p < suite.prompts.size(); ++p) {
    const std::string& prompt = suite.prompts[p];
    if (done.count(p)) {
      const auto& paths = receipt.paths_by_prompt.at(prompt);
      for (std::size_t i = 0; i < paths.size(); ++i) {
        manifest.entries.push_back(audit_entry(out_dir, p, i, prompt, paths[i]));
      }
      continue;
    }
    std::vector<AdapterItem> items;
    for (std::size_t i = 0; i < per_prompt; ++i) items.push_back({audit_image_id(p, i), prompt});
    std::vector<GeneratedImage> made;
    try {
      made = generate_items(generator, items, image_dir, seed, params);
    } catch (const Error& e) {
      throw Error(e.kind(), "prompt " + std::to_string(p) + " (\"" + prompt + "\"): " + e.what());
    }
    auto& paths = receipt.paths_by_prompt[prompt];
    paths.clear();
    for (std::size_t i = 0; i < made.size(); ++i) {
      manifest.entries.push_back(
          audit_entry(out_dir, p, i, prompt, fs::absolute(made[i].path).string()));
      paths.push_back(manifest.entries.back().image_path);
      receipt.seconds_by_item[made[i].id] = made[i].seconds;
    }
    receipt.completed_prompts.push_back(p);
    write_json_atomic(receipt_path, receipt.to_json());
  }
  return manifest;
}

json Annotation::to_json() const {
  return json{{"evaluator_id", evaluator_id},
              {"image_id", image_id},
              {"axis", to_string(axis)},
              {"label", label},
              {"timestamp", timestamp}};
}

Annotation Annotation::from_json(const json& j) {
  try {
    Annotation a;
    a.evaluator_id = j.at("evaluator_id").get<std::string>();
    a.image_id = j.at("image_id").get<std::string>();
    a.axis = parse_bias_axis(j.at("axis").get<std::string>());
    a.label = j.at("label").get<std::string>();
    a.timestamp = j.value("timestamp", "");
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad annotation record: ") + e.what());
  }
}

std::vector<Annotation> read_annotations(const fs::path& path) {
  std::vector<Annotation> out;
  for (const json& rec : read_json_lines(path)) out.push_back(Annotation::from_json(rec));
  return out;
}

std::string annotations_to_jsonl(const std::vector<Annotation>& annotations) {
  std::string out;
  for (const auto& a : annotations) {
    out += a.to_json().dump();
    out += '\n';
  }
  return out;
}

namespace {

std::string allowed_list(const CategoryScheme& scheme) {
  std::string out;
  for (const auto& l : scheme.labels()) {
    if (!out.empty()) out += ", ";
    out += l;
  }
  return out;
}

}  // namespace

ConsensusResult aggregate_labels(const std::vector<Annotation>& annotations,
                                 const CategoryScheme& scheme, std::size_t n_evaluators,
                                 const std::vector<std::string>& expected_ids) {
  scheme.validate();
  // (image, evaluator) -> latest annotation, ordered by (timestamp, label)
  // so input order never matters.
  std::map<std::pair<std::string, std::string>, const Annotation*> latest;
  for (const auto& a : annotations) {
    if (a.axis != scheme.axis) {
      throw Error(ErrorKind::validation, "annotation for '" + a.image_id + "' is on axis " +
                                             std::string(to_string(a.axis)) +
                                             ", scheme is " + std::string(to_string(scheme.axis)));
    }
    if (!scheme.allows(a.label)) {
      throw Error(ErrorKind::validation, "label '" + a.label + "' on '" + a.image_id +
                                             "' is not in the scheme (allowed: " +
                                             allowed_list(scheme) + ")");
    }
    auto [it, fresh] = latest.try_emplace({a.image_id, a.evaluator_id}, &a);
    if (!fresh && std::tie(it->second->timestamp, it->second->label) <
                      std::tie(a.timestamp, a.label)) {
      it->second = &a;
    }
  }

  std::map<std::string, std::map<std::string, std::size_t>, IdLess> votes;
  std::map<std::string, std::size_t, IdLess> voters;
  for (const auto& [key, a] : latest) {
    ++votes[key.first][a->label];
    ++voters[key.first];
  }

  ConsensusResult result;
  for (const auto& [image, tally] : votes) {
    std::size_t best = 0, ties = 0;
    std::string winner;
    for (const auto& [label, count] : tally) {
      if (count > best) {
        best = count;
        ties = 1;
        winner = label;
      } else if (count == best) {
        ++ties;
      }
    }
    result.consensus[image] = ties > 1 ? scheme.uncertain_label : winner;
    if (voters[image] < n_evaluators) result.under_annotated.push_back(image);
  }
  for (const auto& id : expected_ids) {
    if (!result.consensus.count(id)) result.missing.push_back(id);
  }
  std::sort(result.missing.begin(), result.missing.end(), IdLess{});
  return result;
}

json BiasTable::to_json() const {
  json j = {{"axis", to_string(axis)},
            {"categories", categories},
            {"raw_pct", raw_pct},
            {"uncertain_pct", uncertain_pct},
            {"n_images", n_images},
            {"all_uncertain", all_uncertain},
            {"sum_residual", sum_residual},
            {"warnings", warnings}};
  j["normalized_pct"] = normalized_pct ? json(*normalized_pct) : json(nullptr);
  return j;
}

BiasTable BiasTable::from_json(const json& j) {
  try {
    BiasTable t;
    t.axis = parse_bias_axis(j.at("axis").get<std::string>());
    t.categories = j.at("categories").get<std::vector<std::string>>();
    t.raw_pct = j.at("raw_pct").get<std::map<std::string, double>>();
    t.uncertain_pct = j.at("uncertain_pct").get<double>();
    if (j.contains("normalized_pct") && !j.at("normalized_pct").is_null()) {
      t.normalized_pct = j.at("normalized_pct").get<std::map<std::string, double>>();
    }
    t.n_images = j.value("n_images", std::size_t{0});
    t.all_uncertain = j.value("all_uncertain", false);
    t.sum_residual = j.value("sum_residual", 0.0);
    t.warnings = j.value("warnings", std::vector<std::string>{});
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad bias table: ") + e.what());
  }
}

BiasTable tabulate(const std::map<std::string, std::string, IdLess>& consensus,
                   const CategoryScheme& scheme) {
  scheme.validate();
  if (consensus.empty()) throw Error(ErrorKind::input, "cannot tabulate an empty consensus");
  std::map<std::string, std::size_t> counts;
  for (const auto& c : scheme.categories) counts[c] = 0;
  std::size_t uncertain = 0;
  for (const auto& [image, label] : consensus) {
    if (label == scheme.uncertain_label) {
      ++uncertain;
    } else if (counts.count(label)) {
      ++counts[label];
    } else {
      throw Error(ErrorKind::validation, "consensus label '" + label + "' for '" + image +
                                             "' is not in the scheme");
    }
  }

  const double n = static_cast<double>(consensus.size());
  const std::size_t identified = consensus.size() - uncertain;
  BiasTable t;
  t.axis = scheme.axis;
  t.categories = scheme.categories;
  t.n_images = consensus.size();
  t.uncertain_pct = 100.0 * static_cast<double>(uncertain) / n;
  for (const auto& c : scheme.categories) {
    t.raw_pct[c] = 100.0 * static_cast<double>(counts[c]) / n;
  }
  if (identified == 0) {
    t.all_uncertain = true;
  } else {
    std::map<std::string, double> norm;
    for (const auto& c : scheme.categories) {
      norm[c] = 100.0 * static_cast<double>(counts[c]) / static_cast<double>(identified);
    }
    t.normalized_pct = std::move(norm);
  }
  double sum = t.uncertain_pct;
  for (const auto& c : scheme.categories) sum += t.raw_pct[c];
  t.sum_residual = sum - 100.0;
  return t;
}

BiasTable table_from_percentages(const CategoryScheme& scheme,
                                 const std::map<std::string, double>& raw_pct,
                                 double uncertain_pct) {
  scheme.validate();
  BiasTable t;
  t.axis = scheme.axis;
  t.categories = scheme.categories;
  t.uncertain_pct = uncertain_pct;
  double sum = uncertain_pct;
  for (const auto& c : scheme.categories) {
    auto it = raw_pct.find(c);
    if (it == raw_pct.end()) throw Error(ErrorKind::input, "no raw percentage for '" + c + "'");
    t.raw_pct[c] = it->second;
    sum += it->second;
  }
  for (const auto& [c, v] : raw_pct) {
    if (!scheme.allows(c) || c == scheme.uncertain_label) {
      throw Error(ErrorKind::input, "raw percentage for unknown category '" + c + "'");
    }
  }
  t.sum_residual = sum - 100.0;
  if (std::abs(t.sum_residual) > 0.2 + 1e-9) {
    t.warnings.push_back("raw and uncertain percentages sum to " + std::to_string(sum) +
                         ", not 100");
  }
  const double identified = 100.0 - uncertain_pct;
  if (identified <= 0.0) {
    t.all_uncertain = true;
    return t;
  }
  std::map<std::string, double> norm;
  for (const auto& c : scheme.categories) norm[c] = t.raw_pct[c] / identified * 100.0;
  t.normalized_pct = std::move(norm);
  return t;
}

BiasDeviation bias_deviation(const BiasTable& table) {
  if (table.all_uncertain || !table.normalized_pct) {
    throw Error(ErrorKind::domain, "bias deviation is undefined for an all-uncertain table");
  }
  BiasDeviation d;
  d.target = 100.0 / static_cast<double>(table.categories.size());
  for (const auto& c : table.categories) {
    const double dev = table.normalized_pct->at(c) - d.target;
    d.per_category_dev[c] = dev;
    d.max_abs_dev = std::max(d.max_abs_dev, std::abs(dev));
  }
  return d;
}

namespace {

json deviation_json(const BiasTable& t) {
  if (t.all_uncertain) return nullptr;
  const BiasDeviation d = bias_deviation(t);
  return json{{"target", d.target},
              {"per_category_dev", d.per_category_dev},
              {"max_abs_dev", d.max_abs_dev}};
}

}  // namespace

json AuditReport::to_json() const {
  json prompts = json::object();
  for (const auto& [p, table] : per_prompt) {
    json entry = table.to_json();
    entry["deviation"] = deviation_json(table);
    prompts[std::to_string(p)] = std::move(entry);
  }
  json pooled_json = pooled.to_json();
  pooled_json["deviation"] = deviation_json(pooled);
  return json{{"metric", "bias"},
              {"axis", to_string(pooled.axis)},
              {"model", model},
              {"pooled", pooled_json},
              {"per_prompt", prompts},
              {"n_consensus", consensus.consensus.size()},
              {"missing", consensus.missing},
              {"under_annotated", consensus.under_annotated}};
}

AuditReport build_audit_report(const std::vector<Annotation>& annotations,
                               const CategoryScheme& scheme, std::size_t n_evaluators,
                               const std::vector<std::string>& expected_ids) {
  AuditReport report;
  report.consensus = aggregate_labels(annotations, scheme, n_evaluators, expected_ids);
  report.pooled = tabulate(report.consensus.consensus, scheme);
  std::map<std::size_t, std::map<std::string, std::string, IdLess>> by_prompt;
  for (const auto& [image, label] : report.consensus.consensus) {
    if (auto p = prompt_index_of(image)) by_prompt[*p][image] = label;
  }
  for (const auto& [p, consensus] : by_prompt) report.per_prompt[p] = tabulate(consensus, scheme);
  return report;
}

}  // namespace t2i
