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
#include "t2i/annotation.hpp"

#include <chrono>
#include <ctime>
#include <set>
#include <sstream>

#include "fmt/format.h"
#include "t2i/error.hpp"
#include "t2i/fileio.hpp"

namespace t2i {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now_iso() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900,
                     tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

json TaskProgress::to_json() const { return json{{"labeled", labeled}, {"total", total}}; }

namespace {

json optional_pct(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json AgreementReport::to_json() const {
  json pair_list = json::array();
  for (const auto& p : pairs) {
    pair_list.push_back({{"evaluator_a", p.evaluator_a},
                         {"evaluator_b", p.evaluator_b},
                         {"shared", p.shared},
                         {"agreed", p.agreed},
                         {"agreement_pct", optional_pct(p.agreement_pct)}});
  }
  return json{{"task_id", task_id},
              {"axis", to_string(axis)},
              {"agreement_pct", optional_pct(agreement_pct)},
              {"count", count},
              {"n_images", n_images},
              {"pairs", pair_list},
              {"confusion", confusion}};
}

LabelStore::LabelStore(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorKind::input, "cannot open label log " + path_.string());
}

std::vector<json> LabelStore::replay() const {
  if (!fs::exists(path_)) return {};
  std::string text = read_file(path_);
  // A crash mid-append leaves a final line without its newline; drop it.
  if (!text.empty() && text.back() != '\n') {
    const auto cut = text.rfind('\n');
    text.erase(cut == std::string::npos ? 0 : cut + 1);
  }
  return parse_json_lines(text, path_.string());
}

void LabelStore::append(const json& record) {
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorKind::input, "write to label log " + path_.string() + " failed");
}

json task_to_json(const AnnotationTask& task, bool include_entries) {
  json j = {{"task_id", task.task_id},
            {"manifest_ref", task.manifest_ref},
            {"scheme", task.scheme.to_json()},
            {"evaluators", task.evaluators},
            {"created", task.created},
            {"show_prompt", task.show_prompt},
            {"n_images", task.manifest.entries.size()},
            {"expected_labels", task.manifest.entries.size() * task.evaluators.size()}};
  if (include_entries) j["manifest"] = manifest_to_jsonl(task.manifest);
  return j;
}

AnnotationService::AnnotationService(fs::path log_path, Clock clock) : clock_(std::move(clock)) {
  if (log_path.empty()) return;
  store_.emplace(std::move(log_path));
  for (const json& record : store_->replay()) apply(record);
}

void AnnotationService::apply(const json& record) {
  const std::string op = record.at("op").get<std::string>();
  if (op == "create_task") {
    const json& t = record.at("task");
    TaskState s;
    s.task.task_id = t.at("task_id").get<std::string>();
    s.task.manifest_ref = t.value("manifest_ref", "");
    s.task.manifest = manifest_from_jsonl(t.at("manifest").get<std::string>(), s.task.task_id);
    const BiasAxis axis = parse_bias_axis(t.at("scheme").at("axis").get<std::string>());
    s.task.scheme = CategoryScheme::from_json(axis, t.at("scheme"));
    s.task.evaluators = t.at("evaluators").get<std::vector<std::string>>();
    s.task.created = t.at("created").get<std::string>();
    s.task.show_prompt = t.value("show_prompt", false);
    for (std::size_t i = 0; i < s.task.manifest.entries.size(); ++i) {
      s.index_of[s.task.manifest.entries[i].id] = i;
    }
    for (const auto& e : s.task.evaluators) {
      s.labels[e].assign(s.task.manifest.entries.size(), std::nullopt);
      s.labeled[e] = 0;
    }
    order_.push_back(s.task.task_id);
    tasks_.emplace(s.task.task_id, std::move(s));
  } else if (op == "label") {
    TaskState& s = state(record.at("task_id").get<std::string>());
    const std::string evaluator = record.at("evaluator_id").get<std::string>();
    const std::size_t idx = s.index_of.at(record.at("image_id").get<std::string>());
    auto& cell = s.labels.at(evaluator)[idx];
    if (!cell) ++s.labeled[evaluator];
    cell = Cell{record.at("label").get<std::string>(), record.at("timestamp").get<std::string>()};
  } else {
    throw Error(ErrorKind::format, "unknown log record op '" + op + "'");
  }
}

const AnnotationService::TaskState& AnnotationService::state(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(ErrorKind::not_found, "no task '" + task_id + "'");
  return it->second;
}

AnnotationService::TaskState& AnnotationService::state(const std::string& task_id) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(ErrorKind::not_found, "no task '" + task_id + "'");
  return it->second;
}

TaskProgress AnnotationService::progress_of(const TaskState& s, const std::string& evaluator_id) {
  auto it = s.labeled.find(evaluator_id);
  if (it == s.labeled.end()) {
    throw Error(ErrorKind::not_found, "evaluator '" + evaluator_id + "' is not registered on task '" +
                                          s.task.task_id + "'");
  }
  return TaskProgress{it->second, s.task.manifest.entries.size()};
}

std::string AnnotationService::create_task(TaskRequest request) {
  if (request.manifest.entries.empty()) {
    throw Error(ErrorKind::input, "cannot create a task from an empty manifest");
  }
  if (request.evaluators.empty()) throw Error(ErrorKind::input, "a task needs at least one evaluator");
  std::set<std::string> unique;
  for (const auto& e : request.evaluators) {
    if (e.empty()) throw Error(ErrorKind::validation, "empty evaluator id");
    if (!unique.insert(e).second) {
      throw Error(ErrorKind::validation, "evaluator '" + e + "' listed twice");
    }
  }
  request.scheme.validate();
  validate_manifest(request.manifest, false);

  std::unique_lock lock(mutex_);
  if (request.task_id.empty()) {
    std::size_t k = tasks_.size() + 1;
    while (tasks_.count("task-" + std::to_string(k))) ++k;
    request.task_id = "task-" + std::to_string(k);
  } else if (tasks_.count(request.task_id)) {
    throw Error(ErrorKind::conflict, "task '" + request.task_id + "' already exists");
  }
  json scheme = request.scheme.to_json();
  const json record = {{"op", "create_task"},
                       {"task",
                        {{"task_id", request.task_id},
                         {"manifest_ref", request.manifest_ref},
                         {"manifest", manifest_to_jsonl(request.manifest)},
                         {"scheme", scheme},
                         {"evaluators", request.evaluators},
                         {"created", clock_()},
                         {"show_prompt", request.show_prompt}}}};
  if (store_) store_->append(record);
  apply(record);
  return request.task_id;
}

std::vector<AnnotationTask> AnnotationService::list_tasks() const {
  std::shared_lock lock(mutex_);
  std::vector<AnnotationTask> out;
  for (const auto& id : order_) out.push_back(tasks_.at(id).task);
  return out;
}

AnnotationTask AnnotationService::task(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  return state(task_id).task;
}

TaskProgress AnnotationService::progress(const std::string& task_id,
                                         const std::string& evaluator_id) const {
  std::shared_lock lock(mutex_);
  return progress_of(state(task_id), evaluator_id);
}

std::optional<ClaimItem> AnnotationService::claim_next(const std::string& task_id,
                                                       const std::string& evaluator_id) const {
  std::shared_lock lock(mutex_);
  const TaskState& s = state(task_id);
  const TaskProgress p = progress_of(s, evaluator_id);
  if (p.labeled == p.total) return std::nullopt;
  const auto& cells = s.labels.at(evaluator_id);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i]) continue;
    const ManifestEntry& e = s.task.manifest.entries[i];
    ClaimItem item{i, e.id, std::nullopt, p};
    if (s.task.show_prompt && !e.captions.empty()) item.prompt = e.captions.front();
    return item;
  }
  return std::nullopt;
}

TaskProgress AnnotationService::submit_label(const std::string& task_id,
                                             const std::string& evaluator_id,
                                             const std::string& image_id,
                                             const std::string& label) {
  std::unique_lock lock(mutex_);
  TaskState& s = state(task_id);
  progress_of(s, evaluator_id);
  if (!s.index_of.count(image_id)) {
    throw Error(ErrorKind::not_found, "image '" + image_id + "' is not in task '" + task_id + "'");
  }
  if (!s.task.scheme.allows(label)) {
    std::string allowed;
    for (const auto& l : s.task.scheme.labels()) allowed += (allowed.empty() ? "" : ", ") + l;
    throw Error(ErrorKind::validation,
                "label '" + label + "' is not allowed; allowed labels: " + allowed);
  }
  const json record = {{"op", "label"},         {"task_id", task_id}, {"evaluator_id", evaluator_id},
                       {"image_id", image_id},  {"label", label},     {"timestamp", clock_()}};
  if (store_) store_->append(record);
  apply(record);
  return progress_of(s, evaluator_id);
}

std::vector<Annotation> AnnotationService::export_annotations(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  const TaskState& s = state(task_id);
  std::vector<Annotation> out;
  for (std::size_t i = 0; i < s.task.manifest.entries.size(); ++i) {
    for (const auto& e : s.task.evaluators) {
      const auto& cell = s.labels.at(e)[i];
      if (!cell) continue;
      out.push_back(Annotation{e, s.task.manifest.entries[i].id, s.task.scheme.axis, cell->label,
                               cell->timestamp});
    }
  }
  return out;
}

AgreementReport AnnotationService::agreement_report(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  const TaskState& s = state(task_id);
  AgreementReport r;
  r.task_id = task_id;
  r.axis = s.task.scheme.axis;
  const auto& evs = s.task.evaluators;
  std::size_t agreed_total = 0;
  for (std::size_t a = 0; a < evs.size(); ++a) {
    for (std::size_t b = a + 1; b < evs.size(); ++b) {
      PairAgreement p{evs[a], evs[b], 0, 0, std::nullopt};
      const auto& la = s.labels.at(evs[a]);
      const auto& lb = s.labels.at(evs[b]);
      for (std::size_t i = 0; i < la.size(); ++i) {
        if (!la[i] || !lb[i]) continue;
        ++p.shared;
        if (la[i]->label == lb[i]->label) ++p.agreed;
        ++r.confusion[la[i]->label][lb[i]->label];
        if (la[i]->label != lb[i]->label) ++r.confusion[lb[i]->label][la[i]->label];
      }
      if (p.shared > 0) p.agreement_pct = 100.0 * static_cast<double>(p.agreed) / static_cast<double>(p.shared);
      r.count += p.shared;
      agreed_total += p.agreed;
      r.pairs.push_back(std::move(p));
    }
  }
  for (std::size_t i = 0; i < s.task.manifest.entries.size(); ++i) {
    std::size_t n = 0;
    for (const auto& e : evs) n += s.labels.at(e)[i] ? 1 : 0;
    if (n >= 2) ++r.n_images;
  }
  if (r.count > 0) {
    r.agreement_pct = 100.0 * static_cast<double>(agreed_total) / static_cast<double>(r.count);
  }
  return r;
}

fs::path AnnotationService::image_path(const std::string& image_id,
                                       const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  auto lookup = [&](const TaskState& s) -> std::optional<fs::path> {
    if (const ManifestEntry* e = s.task.manifest.find(image_id)) return s.task.manifest.resolve(*e);
    return std::nullopt;
  };
  if (!task_id.empty()) {
    if (auto p = lookup(state(task_id))) return *p;
  } else {
    for (const auto& id : order_) {
      if (auto p = lookup(tasks_.at(id))) return *p;
    }
  }
  throw Error(ErrorKind::not_found, "no image '" + image_id + "'");
}

}  // namespace t2i
