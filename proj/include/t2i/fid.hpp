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
#ifndef T2I_FID_HPP
#define T2I_FID_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "t2i/adapters.hpp"
#include "t2i/ingest.hpp"

namespace t2i {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n_samples = 0;
  std::size_t dim = 0;
};

// Rows are samples. Mean is the componentwise average, cov the unbiased
// (n - 1) sample covariance. Needs >= 2 finite rows.
GaussianStats gaussian_fit(const Eigen::MatrixXd& samples);

[[noreturn]] void throw_dimension_mismatch(std::size_t row, std::size_t got, std::size_t want);

template <typename T>
GaussianStats gaussian_fit(const std::vector<std::vector<T>>& vectors) {
  if (vectors.empty()) return gaussian_fit(Eigen::MatrixXd());
  const std::size_t dim = vectors.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) {
      throw_dimension_mismatch(i, vectors[i].size(), dim);
    }
    for (std::size_t k = 0; k < dim; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          static_cast<double>(vectors[i][k]);
    }
  }
  return gaussian_fit(m);
}

// Regularization applied to both covariances when either one's smallest
// eigenvalue falls below kSingularEigenvalue.
inline constexpr double kSingularEigenvalue = 1e-10;
inline constexpr double kCovarianceRidge = 1e-6;

// ||mu_a - mu_b||^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a^1/2 S_b S_a^1/2)^1/2).
// The symmetric form has the same trace as (S_a S_b)^1/2 and only needs
// symmetric eigendecompositions. Results in [-1e-6, 0) are floored to 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Principal square root of a symmetric PSD matrix; eigenvalues below zero
// are clamped.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m);

struct FidReport {
  std::vector<double> iteration_scores;
  double mean_score = 0.0;
  double std_score = 0.0;  // sample std, 0 for one iteration
  std::size_t n_real_pool = 0;
  std::size_t n_per_side = 0;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 0;
  std::optional<ImageSize> input_size;
  std::string adapter_name;
  // Labels for table rendering.
  std::string model;
  std::string dataset;
  std::string axis;

  nlohmann::json to_json() const;
  static FidReport from_json(const nlohmann::json& j);
};

double sample_mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

// Equal-size protocol: N = |gen|; each iteration draws N real images without
// replacement (seed stream derived from (seed, iteration)), embeds both
// sides and scores the pair. Image ids go on the wire as "i:<id>".
FidReport fid_protocol(const ImageManifest& real_manifest, const ImageManifest& gen_manifest,
                       AdapterClient& embedder, std::size_t iterations, std::uint64_t seed);

}  // namespace t2i

#endif  // T2I_FID_HPP
