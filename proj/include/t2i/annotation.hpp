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
#ifndef T2I_ANNOTATION_HPP
#define T2I_ANNOTATION_HPP

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "t2i/bias.hpp"
#include "t2i/ingest.hpp"

namespace t2i {

using Clock = std::function<std::string()>;

// "YYYY-MM-DDTHH:MM:SS.mmmZ" for the current UTC instant.
std::string utc_now_iso();

struct TaskRequest {
  std::string task_id;  // generated when empty
  std::string manifest_ref;
  ImageManifest manifest;
  CategoryScheme scheme;
  std::vector<std::string> evaluators;
  bool show_prompt = false;
};

struct AnnotationTask {
  std::string task_id;
  std::string manifest_ref;
  ImageManifest manifest;
  CategoryScheme scheme;
  std::vector<std::string> evaluators;
  std::string created;
  bool show_prompt = false;
};

struct TaskProgress {
  std::size_t labeled = 0;
  std::size_t total = 0;
  nlohmann::json to_json() const;
};

struct ClaimItem {
  std::size_t index = 0;
  std::string image_id;
  std::optional<std::string> prompt;  // only when the task shows prompts
  TaskProgress progress;
};

struct PairAgreement {
  std::string evaluator_a;
  std::string evaluator_b;
  std::size_t shared = 0;
  std::size_t agreed = 0;
  std::optional<double> agreement_pct;
};

struct AgreementReport {
  std::string task_id;
  BiasAxis axis = BiasAxis::gender;
  std::optional<double> agreement_pct;  // over all evaluator pairs
  std::size_t count = 0;                // compared (pair, image) combinations
  std::size_t n_images = 0;             // images with >= 2 labels
  std::vector<PairAgreement> pairs;
  // confusion[a][b]: times one evaluator said a and another said b on the
  // same image; symmetric.
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  nlohmann::json to_json() const;
};

// Append-only line log. Each append is flushed before returning; replay
// skips a torn final line left by a crash.
class LabelStore {
 public:
  explicit LabelStore(std::filesystem::path path);
  std::vector<nlohmann::json> replay() const;
  void append(const nlohmann::json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Task registry and label state. Writers hold the exclusive lock and append
// to the log before mutating memory; readers share the lock.
class AnnotationService {
 public:
  // An empty log path keeps state in memory only.
  explicit AnnotationService(std::filesystem::path log_path = {}, Clock clock = utc_now_iso);

  std::string create_task(TaskRequest request);
  std::vector<AnnotationTask> list_tasks() const;
  AnnotationTask task(const std::string& task_id) const;
  TaskProgress progress(const std::string& task_id, const std::string& evaluator_id) const;
  std::optional<ClaimItem> claim_next(const std::string& task_id,
                                      const std::string& evaluator_id) const;
  TaskProgress submit_label(const std::string& task_id, const std::string& evaluator_id,
                            const std::string& image_id, const std::string& label);
  // Latest label per (evaluator, image), manifest order then evaluator order.
  std::vector<Annotation> export_annotations(const std::string& task_id) const;
  AgreementReport agreement_report(const std::string& task_id) const;
  // Resolves an image across tasks (first task in creation order wins
  // unless task_id is given).
  std::filesystem::path image_path(const std::string& image_id,
                                   const std::string& task_id = {}) const;

 private:
  struct Cell {
    std::string label;
    std::string timestamp;
  };
  struct TaskState {
    AnnotationTask task;
    std::map<std::string, std::size_t> index_of;
    // labels[evaluator][image index]
    std::map<std::string, std::vector<std::optional<Cell>>> labels;
    std::map<std::string, std::size_t> labeled;
  };

  void apply(const nlohmann::json& record);
  const TaskState& state(const std::string& task_id) const;
  TaskState& state(const std::string& task_id);
  static TaskProgress progress_of(const TaskState& s, const std::string& evaluator_id);

  mutable std::shared_mutex mutex_;
  std::optional<LabelStore> store_;
  Clock clock_;
  std::vector<std::string> order_;
  std::map<std::string, TaskState> tasks_;
};

nlohmann::json task_to_json(const AnnotationTask& task, bool include_entries = false);

}  // namespace t2i

#endif  // T2I_ANNOTATION_HPP
