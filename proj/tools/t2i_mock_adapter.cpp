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
// Mock adapter executable: serves every protocol mode with the
// deterministic mocks, for exercising the subprocess path end to end.
//   t2i-mock-adapter --mode M --input request.json --output response.json

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "t2i/adapters.hpp"
#include "t2i/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mock adapter"};
  std::string mode, input, output;
  app.add_option("--mode", mode, "embed_image|embed_text|detect|generate")->required();
  app.add_option("--input", input, "Request file")->required();
  app.add_option("--output", output, "Response file")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    t2i::AdapterRequest req = t2i::read_request(input);
    if (t2i::to_string(req.mode) != mode) {
      throw t2i::Error(t2i::ErrorKind::protocol, "--mode " + mode + " disagrees with the request");
    }
    t2i::write_response(output, t2i::serve_mock(req));
  } catch (const t2i::Error& e) {
    std::cerr << "t2i-mock-adapter: " << e.what() << "\n";
    return t2i::exit_code(e.kind());
  }
  return 0;
}
