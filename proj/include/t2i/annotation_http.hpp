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
#ifndef T2I_ANNOTATION_HTTP_HPP
#define T2I_ANNOTATION_HTTP_HPP

#include <filesystem>

#include "t2i/annotation.hpp"
#include "t2i/error.hpp"

namespace httplib {
class Server;
}

namespace t2i {

int http_status(ErrorKind kind);

// Mounts the evaluator API and image route on server. When static_dir is
// set, its files are served at "/" (the browser bundle).
void register_annotation_routes(httplib::Server& server, AnnotationService& service,
                                const std::filesystem::path& static_dir = {});

}  // namespace t2i

#endif  // T2I_ANNOTATION_HTTP_HPP
