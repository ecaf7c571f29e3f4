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
#ifndef T2I_FILEIO_HPP
#define T2I_FILEIO_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace t2i {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target, so a reader
// never observes a half-written artifact.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

void write_json_atomic(const std::filesystem::path& path,
                       const nlohmann::json& doc);

nlohmann::json read_json(const std::filesystem::path& path);

// Parses one JSON object per non-blank line. Errors name the line number.
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);
std::vector<nlohmann::json> parse_json_lines(std::string_view text,
                                             std::string_view origin);

// Scratch directory root: $T2I_AUDIT_TMP when set, else the system temp dir.
std::filesystem::path scratch_root();

// Creates a fresh, uniquely named directory under scratch_root().
std::filesystem::path make_scratch_dir(std::string_view prefix);

}  // namespace t2i

#endif  // T2I_FILEIO_HPP
