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
#include "t2i/annotation_http.hpp"

#include <string>

#include "httplib.h"
#include "json.hpp"
#include "t2i/fileio.hpp"

namespace t2i {

namespace fs = std::filesystem;
using nlohmann::json;

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::not_found:
      return 404;
    case ErrorKind::conflict:
      return 409;
    case ErrorKind::validation:
      return 422;
    case ErrorKind::usage:
    case ErrorKind::input:
    case ErrorKind::format:
    case ErrorKind::size:
    case ErrorKind::domain:
      return 400;
    default:
      return 500;
  }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  send_json(res, json{{"error", {{"code", to_string(kind)}, {"message", message}}}},
            http_status(kind));
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.kind(), e.what());
    } catch (const json::exception& e) {
      send_error(res, ErrorKind::format, std::string("malformed request body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorKind::input, e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw Error(ErrorKind::input, "request body is empty");
  json body = json::parse(req.body);
  if (!body.is_object()) throw Error(ErrorKind::format, "request body must be an object");
  return body;
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw Error(ErrorKind::input, std::string("missing string field '") + key + "'");
  }
  return body.at(key).get<std::string>();
}

TaskRequest task_request_from(const json& body) {
  TaskRequest r;
  r.task_id = body.value("task_id", "");
  if (body.contains("manifest_jsonl")) {
    r.manifest = manifest_from_jsonl(body.at("manifest_jsonl").get<std::string>(), "request");
    r.manifest_ref = body.value("manifest", "inline");
  } else {
    r.manifest_ref = required_string(body, "manifest");
    r.manifest = read_manifest(r.manifest_ref);
  }
  if (body.contains("scheme")) {
    const json& s = body.at("scheme");
    r.scheme = CategoryScheme::from_json(parse_bias_axis(s.at("axis").get<std::string>()), s);
  } else {
    r.scheme = CategoryScheme::for_axis(parse_bias_axis(required_string(body, "axis")));
  }
  if (!body.contains("evaluators") || !body.at("evaluators").is_array()) {
    throw Error(ErrorKind::input, "missing array field 'evaluators'");
  }
  r.evaluators = body.at("evaluators").get<std::vector<std::string>>();
  r.show_prompt = body.value("show_prompt", false);
  return r;
}

json scheme_json(const CategoryScheme& scheme) {
  json j = scheme.to_json();
  j["labels"] = scheme.labels();
  return j;
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

void register_annotation_routes(httplib::Server& server, AnnotationService& service,
                                const fs::path& static_dir) {
  server.Get("/api/tasks", guarded([&service](const httplib::Request&, httplib::Response& res) {
               json tasks = json::array();
               for (const auto& t : service.list_tasks()) tasks.push_back(task_to_json(t));
               send_json(res, json{{"tasks", tasks}});
             }));

  server.Post("/api/tasks", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const std::string id = service.create_task(task_request_from(parse_body(req)));
                send_json(res, task_to_json(service.task(id)), 201);
              }));

  server.Get(R"(/api/tasks/([^/]+)/next)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const std::string task_id = req.matches[1];
               const std::string evaluator = req.get_param_value("evaluator");
               if (evaluator.empty()) throw Error(ErrorKind::usage, "query parameter 'evaluator' is required");
               const AnnotationTask task = service.task(task_id);
               const auto item = service.claim_next(task_id, evaluator);
               if (!item) {
                 send_json(res, json{{"done", true},
                                     {"task_id", task_id},
                                     {"evaluator_id", evaluator},
                                     {"scheme", scheme_json(task.scheme)},
                                     {"progress", service.progress(task_id, evaluator).to_json()}});
                 return;
               }
               json it = {{"image_id", item->image_id},
                          {"index", item->index},
                          {"image_url", "/images/" + httplib::detail::encode_url(item->image_id) +
                                            "?task=" + httplib::detail::encode_url(task_id)}};
               if (item->prompt) it["prompt"] = *item->prompt;
               send_json(res, json{{"done", false},
                                   {"task_id", task_id},
                                   {"evaluator_id", evaluator},
                                   {"item", it},
                                   {"scheme", scheme_json(task.scheme)},
                                   {"progress", item->progress.to_json()}});
             }));

  server.Post(R"(/api/tasks/([^/]+)/labels)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const std::string task_id = req.matches[1];
                const json body = parse_body(req);
                const std::string evaluator = required_string(body, "evaluator_id");
                const std::string image = required_string(body, "image_id");
                const std::string label = required_string(body, "label");
                const TaskProgress p = service.submit_label(task_id, evaluator, image, label);
                send_json(res, json{{"ok", true},
                                    {"task_id", task_id},
                                    {"evaluator_id", evaluator},
                                    {"image_id", image},
                                    {"label", label},
                                    {"progress", p.to_json()}});
              }));

  server.Get(R"(/api/tasks/([^/]+)/export)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               res.set_content(annotations_to_jsonl(service.export_annotations(req.matches[1])),
                               "application/x-ndjson");
             }));

  server.Get(R"(/api/tasks/([^/]+)/agreement)",
             guarded([&service](const httplib::Request& req, httplib::Response& res) {
               send_json(res, service.agreement_report(req.matches[1]).to_json());
             }));

  server.Get(R"(/images/([^/]+))", guarded([&service](const httplib::Request& req,
                                                      httplib::Response& res) {
               const fs::path path =
                   service.image_path(req.matches[1], req.get_param_value("task"));
               if (!fs::is_regular_file(path)) {
                 throw Error(ErrorKind::not_found, "image file missing: " + path.string());
               }
               res.set_content(read_file(path), content_type_for(path));
             }));

  if (!static_dir.empty() && !server.set_mount_point("/", static_dir.string())) {
    throw Error(ErrorKind::input, "static directory " + static_dir.string() + " does not exist");
  }

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send_error(res, res.status == 404 ? ErrorKind::not_found : ErrorKind::input,
                 "no route for this request");
    }
  });
}

}  // namespace t2i
