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
#include "t2i/rprecision.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

#include "t2i/error.hpp"
#include "t2i/rng.hpp"

namespace t2i {

using nlohmann::json;

void EmbeddingSet::validate() const {
  for (const auto& [id, v] : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorKind::input, "embedding '" + id + "' has dimension " +
                                        std::to_string(v.size()) + ", expected " +
                                        std::to_string(dim));
    }
    for (float x : v) {
      if (!std::isfinite(x)) throw Error(ErrorKind::input, "embedding '" + id + "' is not finite");
    }
  }
}

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::input, "cosine_similarity dimension mismatch");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += double(u[i]) * double(v[i]);
    nu += double(u[i]) * double(u[i]);
    nv += double(v[i]) * double(v[i]);
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::domain, "cosine similarity of a zero vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

std::size_t rank_ground_truth(double gt_sim, std::span<const double> distractor_sims) {
  if (!std::isfinite(gt_sim)) throw Error(ErrorKind::input, "ground-truth similarity is not finite");
  std::size_t rank = 0;
  for (double s : distractor_sims) {
    if (!std::isfinite(s)) throw Error(ErrorKind::input, "distractor similarity is not finite");
    if (s >= gt_sim) ++rank;
  }
  return rank;
}

double r_precision_score(std::span<const float> image_emb, std::span<const float> gt_caption_emb,
                         const std::vector<std::span<const float>>& distractor_embs) {
  const double gt = cosine_similarity(gt_caption_emb, image_emb);
  std::vector<double> sims;
  sims.reserve(distractor_embs.size());
  for (const auto& d : distractor_embs) sims.push_back(cosine_similarity(d, image_emb));
  return 1.0 / static_cast<double>(rank_ground_truth(gt, sims) + 1);
}

json RPrecisionReport::to_json() const {
  json scores = json::object();
  for (const auto& [id, s] : per_image_scores) scores[id] = s;
  return json{{"metric", "r_precision_paper"},
              {"per_image_scores", scores},
              {"mean_score", mean_score},
              {"n_images", per_image_scores.size()},
              {"n_distractors", n_distractors},
              {"seed", seed},
              {"embedding_dim", embedding_dim},
              {"model", model},
              {"dataset", dataset},
              {"axis", axis}};
}

RPrecisionReport RPrecisionReport::from_json(const json& j) {
  try {
    if (j.value("metric", "") != "r_precision_paper") {
      throw Error(ErrorKind::input, "not an R-Precision report");
    }
    RPrecisionReport r;
    for (const auto& [id, s] : j.at("per_image_scores").items()) {
      r.per_image_scores[id] = s.get<double>();
    }
    r.mean_score = j.at("mean_score").get<double>();
    r.n_distractors = j.at("n_distractors").get<std::size_t>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.embedding_dim = j.value("embedding_dim", std::size_t{0});
    r.model = j.value("model", "");
    r.dataset = j.value("dataset", "");
    r.axis = j.value("axis", "");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad R-Precision report: ") + e.what());
  }
}

namespace {

struct PoolCaption {
  std::string wire_id;
  const std::string* text;
};

std::string caption_wire_id(const std::string& image_id, std::size_t k) {
  return k == 0 ? "c:" + image_id : "c:" + image_id + "#" + std::to_string(k);
}

}  // namespace

RPrecisionReport evaluate_rprecision(const ImageManifest& gen_manifest,
                                     const CaptionIndex& caption_pool,
                                     AdapterClient& image_embedder,
                                     AdapterClient& text_embedder,
                                     std::size_t n_distractors, std::uint64_t seed) {
  std::vector<PoolCaption> pool;
  std::unordered_map<std::string_view, std::size_t> text_count;
  for (const auto& [id, caps] : caption_pool.records) {
    for (std::size_t k = 0; k < caps.size(); ++k) {
      pool.push_back({caption_wire_id(id, k), &caps[k]});
      ++text_count[caps[k]];
    }
  }
  if (pool.size() <= n_distractors) {
    throw Error(ErrorKind::size, "caption pool has " + std::to_string(pool.size()) +
                                     " captions; need more than " +
                                     std::to_string(n_distractors));
  }

  RPrecisionReport report;
  report.n_distractors = n_distractors;
  report.seed = seed;

  // Draw distractors for every image first, then embed everything needed in
  // two batches.
  struct Plan {
    const ManifestEntry* entry;
    std::vector<std::size_t> distractors;
  };
  std::vector<Plan> plans;
  std::set<std::size_t> needed;
  std::vector<AdapterItem> image_items, text_items;
  std::map<std::string, const std::string*> text_by_id;
  for (const auto& e : gen_manifest.entries) {
    if (e.captions.empty() || e.captions.front().empty()) {
      throw Error(ErrorKind::input, "image '" + e.id + "' has no ground-truth caption");
    }
    const std::string& gt = e.captions.front();
    auto same = text_count.find(gt);
    const std::size_t eligible = pool.size() - (same == text_count.end() ? 0 : same->second);
    if (eligible < n_distractors) {
      throw Error(ErrorKind::size, "image '" + e.id + "': only " + std::to_string(eligible) +
                                       " captions differ from its ground truth");
    }
    Rng rng(derive_seed(seed, e.id));
    Plan plan{&e, {}};
    std::set<std::size_t> taken;
    while (plan.distractors.size() < n_distractors) {
      const std::size_t k = static_cast<std::size_t>(rng.below(pool.size()));
      if (*pool[k].text == gt || !taken.insert(k).second) continue;
      plan.distractors.push_back(k);
    }
    needed.insert(plan.distractors.begin(), plan.distractors.end());
    image_items.push_back({"i:" + e.id, gen_manifest.resolve(e).string()});
    text_items.push_back({"c:" + e.id, gt});
    text_by_id.emplace("c:" + e.id, &gt);
    plans.push_back(std::move(plan));
  }
  // A pool caption can share its wire id with a ground truth when generated
  // ids reuse source ids. Same text shares the embedding; different text
  // gets a distinct id.
  std::map<std::size_t, std::string> resolved;
  for (std::size_t k : needed) {
    std::string id = pool[k].wire_id;
    auto hit = text_by_id.find(id);
    if (hit != text_by_id.end() && *hit->second != *pool[k].text) id += "#pool";
    resolved[k] = id;
    if (text_by_id.emplace(id, pool[k].text).second) text_items.push_back({id, *pool[k].text});
  }

  EmbeddingBatch images, texts;
  try {
    images = embed_items(image_embedder, AdapterMode::embed_image, image_items, seed);
  } catch (const Error& err) {
    throw Error(err.kind(), "image embedding: " + std::string(err.what()));
  }
  try {
    texts = embed_items(text_embedder, AdapterMode::embed_text, text_items, seed);
  } catch (const Error& err) {
    throw Error(err.kind(), "text embedding: " + std::string(err.what()));
  }
  if (images.meta.embedding_dim != texts.meta.embedding_dim) {
    throw Error(ErrorKind::protocol, "image and text embedders disagree on embedding_dim");
  }
  report.embedding_dim = images.meta.embedding_dim.value_or(0);

  double sum = 0.0;
  for (const Plan& plan : plans) {
    const std::string& id = plan.entry->id;
    const Embedding& img = images.vectors.at("i:" + id);
    const Embedding& gt = texts.vectors.at("c:" + id);
    std::vector<std::span<const float>> distractors;
    distractors.reserve(plan.distractors.size());
    for (std::size_t k : plan.distractors) distractors.emplace_back(texts.vectors.at(resolved.at(k)));
    double score = 0.0;
    try {
      score = r_precision_score(img, gt, distractors);
    } catch (const Error& err) {
      throw Error(err.kind(), "image '" + id + "': " + err.what());
    }
    report.per_image_scores[id] = score;
    sum += score;
  }
  report.mean_score = plans.empty() ? 0.0 : sum / static_cast<double>(plans.size());
  return report;
}

}  // namespace t2i
