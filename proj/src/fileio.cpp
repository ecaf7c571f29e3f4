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
#include "t2i/fileio.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "t2i/error.hpp"
#include "t2i/rng.hpp"

namespace t2i {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::input, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::input, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const nlohmann::json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::format, path.string() + ": byte " +
                                       std::to_string(e.byte) + ": " + e.what());
  }
}

std::vector<nlohmann::json> parse_json_lines(std::string_view text,
                                             std::string_view origin) {
  std::vector<nlohmann::json> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::format, std::string(origin) + ": line " +
                                         std::to_string(line_no) + ": " +
                                         e.what());
    }
  }
  return out;
}

std::vector<nlohmann::json> read_json_lines(const fs::path& path) {
  return parse_json_lines(read_file(path), path.string());
}

fs::path scratch_root() {
  if (const char* env = std::getenv("T2I_AUDIT_TMP"); env && *env) {
    return fs::path(env);
  }
  return fs::temp_directory_path();
}

fs::path make_scratch_dir(std::string_view prefix) {
  static std::atomic<std::uint64_t> counter{0};
  const fs::path root = scratch_root();
  fs::create_directories(root);
  const auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::uint64_t s = static_cast<std::uint64_t>(now) ^
                      (static_cast<std::uint64_t>(::getpid()) << 32) ^
                      counter.fetch_add(1);
    const std::uint64_t tag = splitmix64(s);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(tag));
    fs::path dir = root / (std::string(prefix) + "-" + buf);
    if (fs::create_directory(dir)) return dir;
  }
  throw Error(ErrorKind::input, "cannot create scratch dir under " +
                                    root.string());
}

}  // namespace t2i
