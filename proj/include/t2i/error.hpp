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
#ifndef T2I_ERROR_HPP
#define T2I_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace t2i {

enum class ErrorKind {
  usage,
  input,
  format,
  validation,
  size,
  domain,
  not_found,
  conflict,
  adapter,
  protocol,
  timeout,
  numerical,
};

std::string_view to_string(ErrorKind kind);

// Process exit status for an error class: usage=2, input=3, adapter=4,
// numerical=5. Finer kinds fold into those four.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view code() const { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace t2i

#endif  // T2I_ERROR_HPP
