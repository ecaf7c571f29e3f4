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
#ifndef T2I_ADAPTERS_HPP
#define T2I_ADAPTERS_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "t2i/extract.hpp"
#include "t2i/image.hpp"

namespace t2i {

// ---------------------------------------------------------------------------
// Wire protocol
//
// An adapter is any executable invoked as
//
//   <command> --mode <mode> --input <request.json> --output <response.json>
//
// Request:  {"mode", "items":[{"id","payload"}], "params":{...}, "seed"}
// Response: {"mode", "items":[{"id","result"}],
//            "meta":{"embedding_dim","input_size":[w,h],"adapter_name","adapter_version"}}
//
// Embed modes put the vectors in a binary sidecar next to the response; each
// item's `result` is the sidecar file name relative to the response file.
// Detect results are detection objects (or {"no_face":true}); generate
// results are {"path","seconds"}.
// ---------------------------------------------------------------------------

enum class AdapterMode { generate, detect, embed_image, embed_text };

std::string_view to_string(AdapterMode mode);
AdapterMode parse_adapter_mode(std::string_view text);
inline bool is_embed_mode(AdapterMode m) {
  return m == AdapterMode::embed_image || m == AdapterMode::embed_text;
}

struct AdapterItem {
  std::string id;
  std::string payload;  // prompt, image path, or caption
  bool operator==(const AdapterItem&) const = default;
};

struct AdapterRequest {
  AdapterMode mode = AdapterMode::embed_image;
  std::vector<AdapterItem> items;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  bool operator==(const AdapterRequest&) const = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

struct AdapterMeta {
  std::optional<std::size_t> embedding_dim;
  std::optional<ImageSize> input_size;
  std::string adapter_name;
  std::string adapter_version;
  bool operator==(const AdapterMeta&) const = default;
};

struct ResponseItem {
  std::string id;
  nlohmann::json result;
  bool operator==(const ResponseItem&) const = default;
};

using Embedding = std::vector<float>;

struct AdapterResponse {
  AdapterMode mode = AdapterMode::embed_image;
  std::vector<ResponseItem> items;
  AdapterMeta meta;
  // Embed modes only: decoded sidecar contents, keyed by item id.
  std::map<std::string, Embedding> embeddings;
  bool operator==(const AdapterResponse&) const = default;
};

nlohmann::json request_to_json(const AdapterRequest& req);
AdapterRequest request_from_json(const nlohmann::json& j);
nlohmann::json response_to_json(const AdapterResponse& resp);
// Leaves `embeddings` empty; read_response() fills it from the sidecar.
AdapterResponse response_from_json(const nlohmann::json& j);

void write_request(const std::filesystem::path& path, const AdapterRequest& req);
AdapterRequest read_request(const std::filesystem::path& path);
// Embed-mode responses also write `<path>.emb` and point items at it.
void write_response(const std::filesystem::path& path, const AdapterResponse& resp);
AdapterResponse read_response(const std::filesystem::path& path);

// Id bijection, mode echo, per-mode meta and payload checks. Throws
// Error{protocol} naming the offending id.
void validate_response(const AdapterRequest& req, const AdapterResponse& resp);

// ---------------------------------------------------------------------------
// Embedding sidecar, bit-exact:
//   "T2IEMB1\n" | u32 LE dim | { u32 LE id_len | id bytes | dim x f32 LE }*
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSidecarMagic = "T2IEMB1\n";

struct SidecarRecord {
  std::string id;
  Embedding values;
  bool operator==(const SidecarRecord&) const = default;
};

std::string encode_sidecar(std::size_t dim, const std::vector<SidecarRecord>& records);
// Throws Error{protocol} on bad magic, truncation, or trailing bytes.
std::vector<SidecarRecord> decode_sidecar(std::string_view bytes, std::size_t* dim_out = nullptr);

// ---------------------------------------------------------------------------
// Invocation
// ---------------------------------------------------------------------------

// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command(std::string_view command);

// Runs one batch through an external adapter in a fresh scratch directory.
// Errors: nonzero exit -> adapter (with stderr), timeout -> timeout,
// malformed or non-bijective response -> protocol.
AdapterResponse invoke_adapter(const std::string& command, const AdapterRequest& request,
                               std::chrono::milliseconds timeout);

// Anything that answers protocol requests: a subprocess or an in-process
// double. The pipelines only see this interface.
class AdapterClient {
 public:
  virtual ~AdapterClient() = default;
  // Implementations return a validated response.
  virtual AdapterResponse call(const AdapterRequest& request) = 0;
};

class SubprocessAdapter final : public AdapterClient {
 public:
  SubprocessAdapter(std::string command, std::chrono::milliseconds timeout,
                    std::map<std::string, std::string> params = {});
  AdapterResponse call(const AdapterRequest& request) override;

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
  std::map<std::string, std::string> params_;
};

// Serves every mode with the mock functions below, without a process hop.
class MockAdapter final : public AdapterClient {
 public:
  explicit MockAdapter(std::map<std::string, std::string> params = {});
  AdapterResponse call(const AdapterRequest& request) override;

 private:
  std::map<std::string, std::string> params_;
};

// ---------------------------------------------------------------------------
// Mocks: pure functions of (inputs, seed).
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMockEmbeddingDim = 64;
inline constexpr ImageSize kMockInputSize{299, 299};

// Components uniform in [-1, 1). With `paired`, the text id "c:<x>" maps to
// the same vector as the image id "i:<x>".
Embedding mock_embedding(std::string_view id, std::size_t dim, std::uint64_t seed, bool paired);

// Params: dim (default 64), paired ("1"/"true").
AdapterResponse mock_embedder(const AdapterRequest& request);

// Procedural image whose pixels depend only on (prompt, index, seed).
Raster mock_image(std::string_view prompt, std::size_t index, std::uint64_t seed, int size);

// Item ids are "<prompt_idx>_<img_idx>"; the image index is the part after
// the last '_'. Params: out_dir (required), size (default 256).
AdapterResponse mock_generator(const AdapterRequest& request);

// Params: no_face_rate, too_narrow_rate, eyes_fail_rate, mouth_fail_rate
// (each in [0,1], default 0). Exactly round(rate * n) items of the batch hit
// each failure, chosen by a salted hash of the image bytes.
AdapterResponse mock_detector(const AdapterRequest& request);

AdapterResponse serve_mock(const AdapterRequest& request);

// ---------------------------------------------------------------------------
// Typed helpers over AdapterClient
// ---------------------------------------------------------------------------

struct EmbeddingBatch {
  std::map<std::string, Embedding> vectors;
  AdapterMeta meta;
};

// Splits into batches of at most `batch_size` items.
EmbeddingBatch embed_items(AdapterClient& client, AdapterMode mode,
                           const std::vector<AdapterItem>& items, std::uint64_t seed,
                           std::size_t batch_size = 4096);

DetectionMap detect_items(AdapterClient& client, const std::vector<AdapterItem>& items,
                          std::uint64_t seed);

struct GeneratedImage {
  std::string id;
  std::string path;
  double seconds = 0.0;
};

std::vector<GeneratedImage> generate_items(AdapterClient& client,
                                           const std::vector<AdapterItem>& items,
                                           const std::filesystem::path& out_dir,
                                           std::uint64_t seed,
                                           std::map<std::string, std::string> params = {});

}  // namespace t2i

#endif  // T2I_ADAPTERS_HPP
