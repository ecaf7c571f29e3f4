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
#ifndef T2I_RPRECISION_HPP
#define T2I_RPRECISION_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "t2i/adapters.hpp"
#include "t2i/ingest.hpp"

namespace t2i {

inline constexpr std::size_t kDefaultDistractors = 99;

enum class Modality { image, text };

struct EmbeddingSet {
  std::size_t dim = 0;
  Modality modality = Modality::image;
  std::map<std::string, Embedding> vectors;

  // Uniform dimension and finite components; throws Error{input}.
  void validate() const;
};

// u.v / (|u||v|). Zero vectors are a domain error.
double cosine_similarity(std::span<const float> u, std::span<const float> v);

// Number of distractors at least as similar as the ground truth. Ties count
// against the ground truth.
std::size_t rank_ground_truth(double gt_sim, std::span<const double> distractor_sims);

// 1 / (rank + 1) of the ground-truth caption among the distractors, all
// compared against the image embedding.
double r_precision_score(std::span<const float> image_emb, std::span<const float> gt_caption_emb,
                         const std::vector<std::span<const float>>& distractor_embs);

struct RPrecisionReport {
  std::map<std::string, double, IdLess> per_image_scores;
  double mean_score = 0.0;
  std::size_t n_distractors = kDefaultDistractors;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 0;
  std::string model;
  std::string dataset;
  std::string axis;

  nlohmann::json to_json() const;
  static RPrecisionReport from_json(const nlohmann::json& j);
};

// For each generated image: its first caption is the ground truth; draw
// n_distractors captions uniformly without replacement from the pool
// (skipping any caption string equal to the ground truth), embed, score.
// The per-image stream is seeded by (seed, image id), so results do not
// depend on manifest order.
RPrecisionReport evaluate_rprecision(const ImageManifest& gen_manifest,
                                     const CaptionIndex& caption_pool,
                                     AdapterClient& image_embedder,
                                     AdapterClient& text_embedder,
                                     std::size_t n_distractors, std::uint64_t seed);

}  // namespace t2i

#endif  // T2I_RPRECISION_HPP
