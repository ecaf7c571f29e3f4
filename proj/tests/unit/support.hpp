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
#ifndef T2I_TESTS_SUPPORT_HPP
#define T2I_TESTS_SUPPORT_HPP

#include <filesystem>
#include <string>
#include <string_view>

#include <gtest/gtest.h>

#include "t2i/error.hpp"
#include "t2i/fileio.hpp"

namespace t2i::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view prefix = "t2i-test")
      : path_(make_scratch_dir(prefix)) {}
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Runs fn and returns the ErrorKind it throws; fails the test if it does not.
template <typename F>
ErrorKind error_kind_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a t2i::Error";
  return ErrorKind::usage;
}

template <typename F>
std::string error_message_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected a t2i::Error";
  return {};
}

}  // namespace t2i::testing

#endif  // T2I_TESTS_SUPPORT_HPP
