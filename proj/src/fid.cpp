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
#include "t2i/fid.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>

#include "t2i/error.hpp"
#include "t2i/rng.hpp"

namespace t2i {

using nlohmann::json;

void throw_dimension_mismatch(std::size_t row, std::size_t got, std::size_t want) {
  throw Error(ErrorKind::input, "vector " + std::to_string(row) + " has dimension " +
                                    std::to_string(got) + ", expected " + std::to_string(want));
}

GaussianStats gaussian_fit(const Eigen::MatrixXd& samples) {
  const auto n = samples.rows();
  if (n < 2) {
    throw Error(ErrorKind::size, "gaussian_fit needs at least 2 samples, got " +
                                     std::to_string(n));
  }
  if (!samples.allFinite()) {
    throw Error(ErrorKind::input, "gaussian_fit input has non-finite components");
  }
  GaussianStats s;
  s.n_samples = static_cast<std::size_t>(n);
  s.dim = static_cast<std::size_t>(samples.cols());
  s.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

namespace {

const char* kRegularizationAdvice =
    "; try more samples or add a small ridge (e.g. 1e-6 * I) to the covariances";

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(const Eigen::MatrixXd& m, bool vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::numerical,
                std::string("eigendecomposition did not converge") + kRegularizationAdvice);
  }
  return solver;
}

}  // namespace

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  const auto solver = eig(0.5 * (m + m.transpose()), true);
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim != b.dim || a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw Error(ErrorKind::input, "frechet_distance dimension mismatch (" +
                                      std::to_string(a.dim) + " vs " + std::to_string(b.dim) +
                                      ")");
  }
  if (a.mean == b.mean && a.cov == b.cov) return 0.0;

  Eigen::MatrixXd ca = a.cov;
  Eigen::MatrixXd cb = b.cov;
  if (ca.size() > 0) {
    const double min_a = eig(ca, false).eigenvalues().minCoeff();
    const double min_b = eig(cb, false).eigenvalues().minCoeff();
    if (min_a < kSingularEigenvalue || min_b < kSingularEigenvalue) {
      const auto ridge = kCovarianceRidge * Eigen::MatrixXd::Identity(ca.rows(), ca.cols());
      ca += ridge;
      cb += ridge;
    }
  }

  const Eigen::MatrixXd root_a = symmetric_sqrt(ca);
  Eigen::MatrixXd inner = root_a * cb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const double trace_sqrt = eig(inner, false).eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double trace_sum = ca.trace() + cb.trace();
  const double value = mean_term + trace_sum - 2.0 * trace_sqrt;
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::numerical,
                std::string("Frechet distance is not finite") + kRegularizationAdvice);
  }
  if (value < 0.0) {
    // Cancellation error grows with the magnitude of the traces.
    const double tolerance = 1e-6 * std::max(1.0, trace_sum);
    if (value < -tolerance) {
      throw Error(ErrorKind::numerical, "Frechet distance is negative (" +
                                            std::to_string(value) + ")" +
                                            kRegularizationAdvice);
    }
    return 0.0;
  }
  return value;
}

double sample_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

json FidReport::to_json() const {
  json j = {{"metric", "fid"},
            {"iterations", iteration_scores.size()},
            {"iteration_scores", iteration_scores},
            {"mean_score", mean_score},
            {"std_score", std_score},
            {"n_real_pool", n_real_pool},
            {"n_per_side", n_per_side},
            {"seed", seed},
            {"embedding_dim", embedding_dim},
            {"adapter_name", adapter_name},
            {"model", model},
            {"dataset", dataset},
            {"axis", axis}};
  j["input_size"] = input_size ? json::array({input_size->width, input_size->height})
                               : json(nullptr);
  return j;
}

FidReport FidReport::from_json(const json& j) {
  try {
    if (j.value("metric", "") != "fid") {
      throw Error(ErrorKind::input, "not a FID report");
    }
    FidReport r;
    r.iteration_scores = j.at("iteration_scores").get<std::vector<double>>();
    r.mean_score = j.at("mean_score").get<double>();
    r.std_score = j.at("std_score").get<double>();
    r.n_real_pool = j.value("n_real_pool", std::size_t{0});
    r.n_per_side = j.value("n_per_side", std::size_t{0});
    r.seed = j.value("seed", std::uint64_t{0});
    r.embedding_dim = j.value("embedding_dim", std::size_t{0});
    if (j.contains("input_size") && j.at("input_size").is_array()) {
      r.input_size = ImageSize{j["input_size"][0].get<int>(), j["input_size"][1].get<int>()};
    }
    r.adapter_name = j.value("adapter_name", "");
    r.model = j.value("model", "");
    r.dataset = j.value("dataset", "");
    r.axis = j.value("axis", "");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad FID report: ") + e.what());
  }
}

namespace {

std::string wire_id(const ManifestEntry& e) { return "i:" + e.id; }

Eigen::MatrixXd stack(const std::vector<const Embedding*>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front()->size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->size() != dim) throw_dimension_mismatch(i, rows[i]->size(), dim);
    for (std::size_t k = 0; k < dim; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*rows[i])[k];
    }
  }
  return m;
}

EmbeddingBatch embed_entries(AdapterClient& client, const ImageManifest& manifest,
                             const std::vector<std::size_t>& indices, std::uint64_t seed,
                             const std::string& context) {
  std::vector<AdapterItem> items;
  items.reserve(indices.size());
  for (std::size_t i : indices) {
    const ManifestEntry& e = manifest.entries[i];
    items.push_back({wire_id(e), manifest.resolve(e).string()});
  }
  try {
    return embed_items(client, AdapterMode::embed_image, items, seed);
  } catch (const Error& e) {
    throw Error(e.kind(), context + ": " + e.what());
  }
}

}  // namespace

FidReport fid_protocol(const ImageManifest& real_manifest, const ImageManifest& gen_manifest,
                       AdapterClient& embedder, std::size_t iterations, std::uint64_t seed) {
  const std::size_t n = gen_manifest.entries.size();
  const std::size_t pool = real_manifest.entries.size();
  if (iterations == 0) throw Error(ErrorKind::usage, "iterations must be >= 1");
  if (n < 2) throw Error(ErrorKind::size, "generated set needs at least 2 images");
  if (pool < n) {
    throw Error(ErrorKind::size, "real pool (" + std::to_string(pool) +
                                     ") is smaller than the generated set (" +
                                     std::to_string(n) + ")");
  }

  FidReport report;
  report.n_real_pool = pool;
  report.n_per_side = n;
  report.seed = seed;

  std::vector<std::size_t> all_gen(n);
  for (std::size_t i = 0; i < n; ++i) all_gen[i] = i;
  const EmbeddingBatch gen =
      embed_entries(embedder, gen_manifest, all_gen, seed, "generated set");
  report.embedding_dim = gen.meta.embedding_dim.value_or(0);
  report.input_size = gen.meta.input_size;
  report.adapter_name = gen.meta.adapter_name;

  std::vector<const Embedding*> gen_rows;
  for (const auto& e : gen_manifest.entries) gen_rows.push_back(&gen.vectors.at(wire_id(e)));
  const GaussianStats gen_stats = gaussian_fit(stack(gen_rows));

  std::map<std::string, Embedding> real_cache;
  for (std::size_t it = 0; it < iterations; ++it) {
    Rng rng(derive_seed(seed, it));
    std::vector<std::size_t> picked = sample_without_replacement(pool, n, rng);
    std::sort(picked.begin(), picked.end());

    std::vector<std::size_t> missing;
    for (std::size_t i : picked) {
      if (!real_cache.count(wire_id(real_manifest.entries[i]))) missing.push_back(i);
    }
    if (!missing.empty()) {
      EmbeddingBatch fresh = embed_entries(embedder, real_manifest, missing, seed,
                                           "iteration " + std::to_string(it));
      if (fresh.meta.embedding_dim != gen.meta.embedding_dim) {
        throw Error(ErrorKind::protocol, "iteration " + std::to_string(it) +
                                             ": embedding_dim differs from the generated set");
      }
      for (auto& [id, v] : fresh.vectors) real_cache[id] = std::move(v);
    }

    std::vector<const Embedding*> rows;
    rows.reserve(n);
    for (std::size_t i : picked) rows.push_back(&real_cache.at(wire_id(real_manifest.entries[i])));
    const GaussianStats real_stats = gaussian_fit(stack(rows));
    report.iteration_scores.push_back(frechet_distance(real_stats, gen_stats));
  }

  report.mean_score = sample_mean(report.iteration_scores);
  report.std_score = sample_std(report.iteration_scores);
  return report;
}

}  // namespace t2i
