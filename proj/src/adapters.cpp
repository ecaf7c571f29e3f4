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
#include "t2i/adapters.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <thread>

#include "t2i/error.hpp"
#include "t2i/fileio.hpp"
#include "t2i/rng.hpp"

namespace t2i {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(AdapterMode mode) {
  switch (mode) {
    case AdapterMode::generate: return "generate";
    case AdapterMode::detect: return "detect";
    case AdapterMode::embed_image: return "embed_image";
    case AdapterMode::embed_text: return "embed_text";
  }
  return "unknown";
}

AdapterMode parse_adapter_mode(std::string_view text) {
  if (text == "generate") return AdapterMode::generate;
  if (text == "detect") return AdapterMode::detect;
  if (text == "embed_image") return AdapterMode::embed_image;
  if (text == "embed_text") return AdapterMode::embed_text;
  throw Error(ErrorKind::protocol, "unknown adapter mode '" + std::string(text) + "'");
}

json request_to_json(const AdapterRequest& req) {
  json items = json::array();
  for (const auto& it : req.items) items.push_back({{"id", it.id}, {"payload", it.payload}});
  return json{{"mode", to_string(req.mode)},
              {"items", items},
              {"params", req.params},
              {"seed", req.seed}};
}

AdapterRequest request_from_json(const json& j) {
  try {
    AdapterRequest req;
    req.mode = parse_adapter_mode(j.at("mode").get<std::string>());
    for (const json& it : j.at("items")) {
      req.items.push_back({it.at("id").get<std::string>(), it.at("payload").get<std::string>()});
    }
    req.params = j.value("params", std::map<std::string, std::string>{});
    req.seed = j.value("seed", std::uint64_t{0});
    return req;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::protocol, std::string("malformed request: ") + e.what());
  }
}

json response_to_json(const AdapterResponse& resp) {
  json items = json::array();
  for (const auto& it : resp.items) items.push_back({{"id", it.id}, {"result", it.result}});
  json meta = {{"adapter_name", resp.meta.adapter_name},
               {"adapter_version", resp.meta.adapter_version}};
  meta["embedding_dim"] = resp.meta.embedding_dim ? json(*resp.meta.embedding_dim) : json(nullptr);
  meta["input_size"] = resp.meta.input_size
                           ? json::array({resp.meta.input_size->width, resp.meta.input_size->height})
                           : json(nullptr);
  return json{{"mode", to_string(resp.mode)}, {"items", items}, {"meta", meta}};
}

AdapterResponse response_from_json(const json& j) {
  try {
    AdapterResponse resp;
    resp.mode = parse_adapter_mode(j.at("mode").get<std::string>());
    for (const json& it : j.at("items")) {
      resp.items.push_back({it.at("id").get<std::string>(), it.value("result", json())});
    }
    const json& meta = j.at("meta");
    if (meta.contains("embedding_dim") && !meta.at("embedding_dim").is_null()) {
      resp.meta.embedding_dim = meta.at("embedding_dim").get<std::size_t>();
    }
    if (meta.contains("input_size") && !meta.at("input_size").is_null()) {
      const json& s = meta.at("input_size");
      resp.meta.input_size = ImageSize{s.at(0).get<int>(), s.at(1).get<int>()};
    }
    resp.meta.adapter_name = meta.value("adapter_name", "");
    resp.meta.adapter_version = meta.value("adapter_version", "");
    return resp;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::protocol, std::string("malformed response: ") + e.what());
  }
}

void write_request(const fs::path& path, const AdapterRequest& req) {
  write_json_atomic(path, request_to_json(req));
}

AdapterRequest read_request(const fs::path& path) {
  try {
    return request_from_json(read_json(path));
  } catch (const Error& e) {
    throw Error(ErrorKind::protocol, e.what());
  }
}

void write_response(const fs::path& path, const AdapterResponse& resp) {
  AdapterResponse copy = resp;
  if (is_embed_mode(resp.mode)) {
    const std::size_t dim = resp.meta.embedding_dim.value_or(0);
    std::vector<SidecarRecord> records;
    records.reserve(resp.items.size());
    for (const auto& it : resp.items) {
      auto e = resp.embeddings.find(it.id);
      if (e == resp.embeddings.end()) continue;
      records.push_back({it.id, e->second});
    }
    fs::path sidecar = path;
    sidecar += ".emb";
    write_file_atomic(sidecar, encode_sidecar(dim, records));
    for (auto& it : copy.items) it.result = sidecar.filename().string();
  }
  write_json_atomic(path, response_to_json(copy));
}

AdapterResponse read_response(const fs::path& path) {
  json doc;
  try {
    doc = read_json(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::protocol, e.what());
  }
  AdapterResponse resp = response_from_json(doc);
  if (is_embed_mode(resp.mode)) {
    std::set<std::string> files;
    for (const auto& it : resp.items) {
      if (!it.result.is_string()) {
        throw Error(ErrorKind::protocol,
                    "embedding result for '" + it.id + "' must name the sidecar file");
      }
      files.insert(it.result.get<std::string>());
    }
    for (const auto& name : files) {
      std::size_t dim = 0;
      for (auto& rec : decode_sidecar(read_file(path.parent_path() / name), &dim)) {
        resp.embeddings[rec.id] = std::move(rec.values);
      }
      if (resp.meta.embedding_dim && *resp.meta.embedding_dim != dim) {
        throw Error(ErrorKind::protocol, "sidecar dim " + std::to_string(dim) +
                                             " disagrees with declared embedding_dim");
      }
    }
  }
  return resp;
}

void validate_response(const AdapterRequest& req, const AdapterResponse& resp) {
  if (resp.mode != req.mode) {
    throw Error(ErrorKind::protocol, "response mode '" + std::string(to_string(resp.mode)) +
                                         "' does not echo request mode '" +
                                         std::string(to_string(req.mode)) + "'");
  }
  std::set<std::string_view> wanted;
  for (const auto& it : req.items) {
    if (!wanted.insert(it.id).second) {
      throw Error(ErrorKind::protocol, "duplicate request id '" + it.id + "'");
    }
  }
  std::set<std::string_view> seen;
  for (const auto& it : resp.items) {
    if (!wanted.count(it.id)) {
      throw Error(ErrorKind::protocol, "response has unexpected id '" + it.id + "'");
    }
    if (!seen.insert(it.id).second) {
      throw Error(ErrorKind::protocol, "response repeats id '" + it.id + "'");
    }
  }
  for (const auto& it : req.items) {
    if (!seen.count(it.id)) {
      throw Error(ErrorKind::protocol, "response is missing id '" + it.id + "'");
    }
  }

  switch (req.mode) {
    case AdapterMode::embed_image:
    case AdapterMode::embed_text: {
      if (!resp.meta.embedding_dim || *resp.meta.embedding_dim == 0) {
        throw Error(ErrorKind::protocol, "embed response must declare embedding_dim");
      }
      const std::size_t dim = *resp.meta.embedding_dim;
      for (const auto& it : resp.items) {
        auto e = resp.embeddings.find(it.id);
        if (e == resp.embeddings.end()) {
          throw Error(ErrorKind::protocol, "no embedding for '" + it.id + "'");
        }
        if (e->second.size() != dim) {
          throw Error(ErrorKind::protocol, "embedding for '" + it.id + "' has wrong dimension");
        }
        for (float v : e->second) {
          if (!std::isfinite(v)) {
            throw Error(ErrorKind::protocol, "embedding for '" + it.id + "' is not finite");
          }
        }
      }
      break;
    }
    case AdapterMode::detect:
      for (const auto& it : resp.items) {
        if (!it.result.is_object()) {
          throw Error(ErrorKind::protocol, "detection for '" + it.id + "' is not an object");
        }
        try {
          detection_from_json(it.result);
        } catch (const Error& e) {
          throw Error(ErrorKind::protocol, "detection for '" + it.id + "': " + e.what());
        }
      }
      break;
    case AdapterMode::generate:
      for (const auto& it : resp.items) {
        if (!it.result.is_object() || !it.result.contains("path") ||
            !it.result.at("path").is_string()) {
          throw Error(ErrorKind::protocol, "generate result for '" + it.id + "' lacks a path");
        }
      }
      break;
  }
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) throw Error(ErrorKind::protocol, "truncated sidecar");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += 4;
  return v;
}

}  // namespace

std::string encode_sidecar(std::size_t dim, const std::vector<SidecarRecord>& records) {
  std::string out(kSidecarMagic);
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& rec : records) {
    if (rec.values.size() != dim) {
      throw Error(ErrorKind::protocol, "sidecar record '" + rec.id + "' has wrong dimension");
    }
    put_u32(out, static_cast<std::uint32_t>(rec.id.size()));
    out += rec.id;
    for (float v : rec.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<SidecarRecord> decode_sidecar(std::string_view bytes, std::size_t* dim_out) {
  if (bytes.substr(0, kSidecarMagic.size()) != kSidecarMagic) {
    throw Error(ErrorKind::protocol, "sidecar has bad magic");
  }
  std::size_t pos = kSidecarMagic.size();
  const std::uint32_t dim = get_u32(bytes, pos);
  if (dim_out) *dim_out = dim;
  std::vector<SidecarRecord> out;
  while (pos < bytes.size()) {
    const std::uint32_t len = get_u32(bytes, pos);
    if (bytes.size() - pos < len) throw Error(ErrorKind::protocol, "truncated sidecar id");
    SidecarRecord rec;
    rec.id = std::string(bytes.substr(pos, len));
    pos += len;
    rec.values.resize(dim);
    for (std::uint32_t k = 0; k < dim; ++k) {
      rec.values[k] = std::bit_cast<float>(get_u32(bytes, pos));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char c : command) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_token = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_token) {
        out.push_back(std::move(cur));
        cur.clear();
        in_token = false;
      }
    } else {
      cur.push_back(c);
      in_token = true;
    }
  }
  if (quote) throw Error(ErrorKind::usage, "unterminated quote in adapter command");
  if (in_token) out.push_back(std::move(cur));
  return out;
}

namespace {

std::string tail_of(const fs::path& path, std::size_t limit) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  std::string text = read_file(path);
  if (text.size() > limit) text = "..." + text.substr(text.size() - limit);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

AdapterResponse invoke_adapter(const std::string& command, const AdapterRequest& request,
                               std::chrono::milliseconds timeout) {
  std::vector<std::string> args = split_command(command);
  if (args.empty()) throw Error(ErrorKind::usage, "empty adapter command");

  const fs::path dir = make_scratch_dir("t2i-adapter");
  const fs::path req_path = dir / "request.json";
  const fs::path resp_path = dir / "response.json";
  const fs::path out_log = dir / "stdout.log";
  const fs::path err_log = dir / "stderr.log";
  write_request(req_path, request);

  args.insert(args.end(), {"--mode", std::string(to_string(request.mode)), "--input",
                           req_path.string(), "--output", resp_path.string()});
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorKind::adapter, "fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    ::setpgid(0, 0);
    const int out_fd = ::open(out_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int err_fd = ::open(err_log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (out_fd >= 0) ::dup2(out_fd, STDOUT_FILENO);
    if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
    ::execvp(argv[0], argv.data());
    const std::string msg = std::string("exec ") + argv[0] + ": " + std::strerror(errno) + "\n";
    [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg.data(), msg.size());
    ::_exit(127);
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto pause = std::chrono::milliseconds(1);
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) {
      throw Error(ErrorKind::adapter, "waitpid failed: " + std::string(std::strerror(errno)));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw Error(ErrorKind::timeout, "adapter '" + args[0] + "' timed out after " +
                                          std::to_string(timeout.count()) + " ms (scratch " +
                                          dir.string() + ")");
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(20));
  }

  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string why = WIFEXITED(status)
                                ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                : "killed by signal " + std::to_string(WTERMSIG(status));
    throw Error(ErrorKind::adapter,
                "adapter '" + args[0] + "' " + why + ": " + tail_of(err_log, 4096));
  }

  AdapterResponse resp;
  std::error_code ec;
  if (!fs::exists(resp_path, ec)) {
    throw Error(ErrorKind::protocol, "adapter '" + args[0] + "' wrote no response file");
  }
  resp = read_response(resp_path);
  validate_response(request, resp);
  fs::remove_all(dir, ec);
  return resp;
}

namespace {

AdapterRequest with_defaults(const AdapterRequest& request,
                             const std::map<std::string, std::string>& defaults) {
  AdapterRequest req = request;
  for (const auto& [k, v] : defaults) req.params.emplace(k, v);
  return req;
}

double param_double(const std::map<std::string, std::string>& params, const std::string& key,
                    double fallback) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw Error(ErrorKind::usage, "param '" + key + "' is not a number: " + it->second);
  }
}

bool param_flag(const std::map<std::string, std::string>& params, const std::string& key) {
  auto it = params.find(key);
  return it != params.end() && (it->second == "1" || it->second == "true");
}

}  // namespace

SubprocessAdapter::SubprocessAdapter(std::string command, std::chrono::milliseconds timeout,
                                     std::map<std::string, std::string> params)
    : command_(std::move(command)), timeout_(timeout), params_(std::move(params)) {}

AdapterResponse SubprocessAdapter::call(const AdapterRequest& request) {
  return invoke_adapter(command_, with_defaults(request, params_), timeout_);
}

MockAdapter::MockAdapter(std::map<std::string, std::string> params)
    : params_(std::move(params)) {}

AdapterResponse MockAdapter::call(const AdapterRequest& request) {
  const AdapterRequest req = with_defaults(request, params_);
  AdapterResponse resp = serve_mock(req);
  validate_response(req, resp);
  return resp;
}

Embedding mock_embedding(std::string_view id, std::size_t dim, std::uint64_t seed, bool paired) {
  std::string key(id);
  if (paired && key.rfind("c:", 0) == 0) key = "i:" + key.substr(2);
  Rng rng(derive_seed(seed, key));
  Embedding v(dim);
  for (auto& x : v) x = static_cast<float>(rng.uniform() * 2.0 - 1.0);
  return v;
}

namespace {

AdapterMeta mock_meta() {
  AdapterMeta meta;
  meta.adapter_name = "t2i-mock";
  meta.adapter_version = "1";
  return meta;
}

}  // namespace

AdapterResponse mock_embedder(const AdapterRequest& request) {
  const double dim_param = param_double(request.params, "dim", double(kMockEmbeddingDim));
  if (dim_param < 1) throw Error(ErrorKind::usage, "mock embedder dim must be >= 1");
  const auto dim = static_cast<std::size_t>(dim_param);
  const bool paired = param_flag(request.params, "paired");
  AdapterResponse resp;
  resp.mode = request.mode;
  resp.meta = mock_meta();
  resp.meta.embedding_dim = dim;
  resp.meta.input_size = kMockInputSize;
  for (const auto& it : request.items) {
    resp.items.push_back({it.id, nullptr});
    resp.embeddings[it.id] = mock_embedding(it.id, dim, request.seed, paired);
  }
  return resp;
}

Raster mock_image(std::string_view prompt, std::size_t index, std::uint64_t seed, int size) {
  if (size < 1) throw Error(ErrorKind::usage, "mock image size must be >= 1");
  Rng rng(derive_seed(derive_seed(seed, prompt), index));
  std::uint8_t base[3], accent[3];
  for (auto& c : base) c = static_cast<std::uint8_t>(rng.below(256));
  for (auto& c : accent) c = static_cast<std::uint8_t>(rng.below(256));
  const int cx = size / 2 + static_cast<int>(rng.below(9)) - 4;
  const int cy = size / 2 + static_cast<int>(rng.below(9)) - 4;
  const int radius = size / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 8 + 1)));
  Raster img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      std::uint8_t* p = img.pixel(x, y);
      const int dx = x - cx, dy = y - cy;
      const bool inside = dx * dx + dy * dy <= radius * radius;
      for (int c = 0; c < 3; ++c) {
        const int grad = (x * (c + 1) + y * (3 - c)) % 64;
        p[c] = static_cast<std::uint8_t>(((inside ? accent[c] : base[c]) + grad) & 0xff);
      }
    }
  }
  return img;
}

AdapterResponse mock_generator(const AdapterRequest& request) {
  auto dir_it = request.params.find("out_dir");
  if (dir_it == request.params.end() || dir_it->second.empty()) {
    throw Error(ErrorKind::usage, "mock generator needs params.out_dir");
  }
  const fs::path out_dir = dir_it->second;
  const int size = static_cast<int>(param_double(request.params, "size", 256));
  AdapterResponse resp;
  resp.mode = AdapterMode::generate;
  resp.meta = mock_meta();
  for (std::size_t k = 0; k < request.items.size(); ++k) {
    const auto& it = request.items[k];
    std::size_t index = k;
    if (const auto us = it.id.rfind('_'); us != std::string::npos) {
      try {
        index = std::stoul(it.id.substr(us + 1));
      } catch (const std::exception&) {
      }
    }
    const fs::path path = out_dir / (it.id + ".png");
    write_png(path, mock_image(it.payload, index, request.seed, size));
    resp.items.push_back({it.id, json{{"path", path.string()}, {"seconds", 0.0}}});
  }
  return resp;
}

AdapterResponse mock_detector(const AdapterRequest& request) {
  const std::size_t n = request.items.size();
  struct Probe {
    std::uint64_t hash = 0;
    int width = 0, height = 0;
  };
  std::vector<Probe> probes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string bytes = read_file(request.items[i].payload);
    const Raster img = decode_png({reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                   bytes.size()});
    probes[i] = {fnv1a64(bytes), img.width, img.height};
  }

  // Failure assignment: rank the still-eligible items on a salted hash and
  // take exactly round(rate * n) of them. no_face items are excluded from
  // the later failure modes so every configured count is exact.
  std::vector<bool> no_face(n, false), narrow(n, false), eyes_bad(n, false), mouth_bad(n, false);
  auto assign = [&](std::vector<bool>& flag, const char* key, std::uint64_t salt) {
    const double rate = std::clamp(param_double(request.params, key, 0.0), 0.0, 1.0);
    std::size_t want = static_cast<std::size_t>(std::lround(rate * double(n)));
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < n; ++i) {
      if (&flag != &no_face && no_face[i]) continue;
      ranked.emplace_back(derive_seed(probes[i].hash ^ request.seed, salt), i);
    }
    std::sort(ranked.begin(), ranked.end());
    want = std::min(want, ranked.size());
    for (std::size_t k = 0; k < want; ++k) flag[ranked[k].second] = true;
  };
  assign(no_face, "no_face_rate", 1);
  assign(narrow, "too_narrow_rate", 2);
  assign(eyes_bad, "eyes_fail_rate", 3);
  assign(mouth_bad, "mouth_fail_rate", 4);

  AdapterResponse resp;
  resp.mode = AdapterMode::detect;
  resp.meta = mock_meta();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& it = request.items[i];
    if (no_face[i]) {
      resp.items.push_back({it.id, detection_to_json(std::nullopt, it.id)});
      continue;
    }
    const int cx = probes[i].width / 2;
    const int cy = probes[i].height / 2;
    DetectionRecord det;
    det.image_id = it.id;
    det.confidence = 0.9 + double(probes[i].hash % 1000) / 10000.0;
    det.bbox = {cx - 55, cy - 65, 110, narrow[i] ? 115 : 130};
    det.landmarks.left_eye = Point{cx - 55, cy - 20};
    det.landmarks.right_eye = Point{eyes_bad[i] ? cx + 35 : cx + 55, cy - 17};
    det.landmarks.nose = Point{cx, cy + 5};
    det.landmarks.mouth_left = Point{mouth_bad[i] ? cx - 12 : cx - 22, cy + 35};
    det.landmarks.mouth_right = Point{mouth_bad[i] ? cx + 12 : cx + 22, cy + 36};
    resp.items.push_back({it.id, detection_to_json(det, it.id)});
  }
  return resp;
}

AdapterResponse serve_mock(const AdapterRequest& request) {
  switch (request.mode) {
    case AdapterMode::embed_image:
    case AdapterMode::embed_text:
      return mock_embedder(request);
    case AdapterMode::generate:
      return mock_generator(request);
    case AdapterMode::detect:
      return mock_detector(request);
  }
  throw Error(ErrorKind::protocol, "unsupported mode");
}

EmbeddingBatch embed_items(AdapterClient& client, AdapterMode mode,
                           const std::vector<AdapterItem>& items, std::uint64_t seed,
                           std::size_t batch_size) {
  if (!is_embed_mode(mode)) throw Error(ErrorKind::usage, "embed_items needs an embed mode");
  if (batch_size == 0) batch_size = items.size();
  EmbeddingBatch out;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    AdapterRequest req;
    req.mode = mode;
    req.seed = seed;
    const std::size_t end = std::min(items.size(), start + batch_size);
    req.items.assign(items.begin() + static_cast<std::ptrdiff_t>(start),
                     items.begin() + static_cast<std::ptrdiff_t>(end));
    AdapterResponse resp = client.call(req);
    if (out.meta.embedding_dim && out.meta.embedding_dim != resp.meta.embedding_dim) {
      throw Error(ErrorKind::protocol, "embedding_dim changed between batches");
    }
    out.meta = resp.meta;
    for (auto& [id, v] : resp.embeddings) out.vectors[id] = std::move(v);
  }
  return out;
}

DetectionMap detect_items(AdapterClient& client, const std::vector<AdapterItem>& items,
                          std::uint64_t seed) {
  AdapterRequest req;
  req.mode = AdapterMode::detect;
  req.items = items;
  req.seed = seed;
  const AdapterResponse resp = client.call(req);
  DetectionMap out;
  for (const auto& it : resp.items) {
    auto det = detection_from_json(it.result);
    if (det) det->image_id = it.id;
    out.emplace(it.id, std::move(det));
  }
  return out;
}

std::vector<GeneratedImage> generate_items(AdapterClient& client,
                                           const std::vector<AdapterItem>& items,
                                           const fs::path& out_dir, std::uint64_t seed,
                                           std::map<std::string, std::string> params) {
  AdapterRequest req;
  req.mode = AdapterMode::generate;
  req.items = items;
  req.seed = seed;
  req.params = std::move(params);
  req.params["out_dir"] = out_dir.string();
  const AdapterResponse resp = client.call(req);
  std::map<std::string, const ResponseItem*> by_id;
  for (const auto& it : resp.items) by_id[it.id] = &it;
  std::vector<GeneratedImage> out;
  for (const auto& it : items) {
    const ResponseItem* r = by_id.at(it.id);
    out.push_back({it.id, r->result.at("path").get<std::string>(),
                   r->result.value("seconds", 0.0)});
  }
  return out;
}

}  // namespace t2i
