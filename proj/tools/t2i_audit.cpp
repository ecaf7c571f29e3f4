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
// t2i-audit: command-line entry point for the evaluation pipelines.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "t2i/adapters.hpp"
#include "t2i/annotation.hpp"
#include "t2i/annotation_http.hpp"
#include "t2i/bias.hpp"
#include "t2i/error.hpp"
#include "t2i/extract.hpp"
#include "t2i/fid.hpp"
#include "t2i/fileio.hpp"
#include "t2i/ingest.hpp"
#include "t2i/report.hpp"
#include "t2i/rprecision.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include "httplib.h"

namespace fs = std::filesystem;
using namespace t2i;

namespace {

struct RunOptions {
  std::string output_root = ".";
  std::string run_id;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  double timeout_s = 600.0;
  std::vector<std::string> adapter_params;

  fs::path run_dir() const {
    return fs::path(output_root) / (run_id.empty() ? "run-" + std::to_string(seed) : run_id);
  }
  // Relative outputs land under <output_root>/<run_id>/.
  fs::path out(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : run_dir() / path;
  }
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorKind::usage, std::string("--") + what + " is required");
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorKind::input, std::string(what) + " file not found: " + path);
  }
}

bool on_path(const std::string& exe) {
  if (exe.find('/') != std::string::npos) return ::access(exe.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const std::string dir(rest.substr(0, colon));
    if (!dir.empty() && ::access((fs::path(dir) / exe).c_str(), X_OK) == 0) return true;
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return false;
}

std::map<std::string, std::string> parse_params(const std::vector<std::string>& kvs) {
  std::map<std::string, std::string> out;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::usage, "adapter parameter '" + kv + "' is not key=value");
    }
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

// "mock" selects the in-process mock adapter; anything else is a command line.
std::unique_ptr<AdapterClient> make_adapter(const std::string& command, const RunOptions& run,
                                            const char* role) {
  if (command.empty()) throw Error(ErrorKind::usage, std::string("--") + role + " is required");
  auto params = parse_params(run.adapter_params);
  if (command == "mock") return std::make_unique<MockAdapter>(std::move(params));
  const auto argv = split_command(command);
  if (argv.empty() || !on_path(argv.front())) {
    throw Error(ErrorKind::adapter, std::string(role) + " command not found: " + command);
  }
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(run.timeout_s * 1000.0));
  return std::make_unique<SubprocessAdapter>(command, timeout, std::move(params));
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string annotations, format = "coco_json", preset, image_root, name, axis = "other", out;
  std::vector<std::string> categories, keywords;
  std::size_t count = 10000;
};

void run_ingest(const IngestArgs& a, const RunOptions& run) {
  require_file(a.annotations, "annotations");
  const CaptionFormat format = parse_caption_format(a.format);
  const ManifestAxis axis = parse_manifest_axis(a.axis);
  std::vector<std::string> categories = a.categories, keywords = a.keywords;
  if (!a.preset.empty()) {
    if (a.preset == "sport") {
      categories.push_back("person");
      for (const auto& c : coco_sport_categories()) categories.push_back(c);
    } else {
      for (const auto& k : keyword_preset(a.preset)) keywords.push_back(k);
    }
  }
  if (categories.empty() == keywords.empty()) {
    throw Error(ErrorKind::usage, "give exactly one of --categories, --keywords or --preset");
  }
  const CaptionIndex index = load_caption_index(a.annotations, format);
  const std::string name = a.name.empty() ? fs::path(a.annotations).stem().string() : a.name;
  ImageManifest m = categories.empty()
                        ? filter_by_keywords(index, keywords, a.count, name, axis)
                        : filter_by_category(index, categories, a.count, name, axis);
  m.root = fs::absolute(a.image_root.empty() ? fs::path(a.annotations).parent_path()
                                             : fs::path(a.image_root))
               .lexically_normal()
               .string();
  const fs::path out = run.out(a.out.empty() ? "manifest.jsonl" : a.out);
  write_manifest(out, m);
  print_warnings(m.warnings);
  std::cout << "wrote " << m.entries.size() << " entries to " << out.string() << "\n";
}

struct ExtractArgs {
  std::string manifest, detections, detector, out = "crops";
  std::vector<std::string> features{"face", "eyes", "mouth", "nose"};
  int width = 160, height = 160;
};

void run_extract(const ExtractArgs& a, const RunOptions& run) {
  require_file(a.manifest, "manifest");
  if (a.detections.empty() == a.detector.empty()) {
    throw Error(ErrorKind::usage, "give exactly one of --detections or --detector");
  }
  std::vector<Feature> features;
  for (const auto& f : a.features) features.push_back(parse_feature(f));
  CropSpec spec;
  spec.required_width = a.width;
  spec.required_height = a.height;
  spec.validate();
  std::unique_ptr<AdapterClient> detector;
  if (!a.detections.empty()) {
    require_file(a.detections, "detections");
  } else {
    detector = make_adapter(a.detector, run, "detector");
  }

  const ImageManifest manifest = read_manifest(a.manifest);
  const fs::path out_root = run.out(a.out);
  DetectionMap dets;
  if (detector) {
    std::vector<AdapterItem> items;
    for (const auto& e : manifest.entries) {
      items.push_back({e.id, fs::absolute(manifest.resolve(e)).string()});
    }
    dets = detect_items(*detector, items, run.seed);
    write_detections(out_root / "detections.jsonl", dets);
  } else {
    dets = read_detections(a.detections);
  }
  const ExtractionSummary summary =
      run_extraction(manifest, dets, spec, features, out_root, GateThresholds{}, run.jobs);
  for (const auto& [feature, result] : summary.features) {
    ImageManifest m = result.manifest;
    m.root = ".";  // crops sit next to the per-feature manifests
    write_manifest(out_root / (std::string(to_string(feature)) + ".jsonl"), m);
  }
  write_json_atomic(out_root / "summary.json", summary.to_json());
  std::cout << summary.to_json().dump(2) << "\n";
}

struct FidArgs {
  std::string real, gen, embedder, out = "fid.json", model, dataset, axis;
  std::size_t iterations = 10;
};

void run_fid(const FidArgs& a, const RunOptions& run) {
  require_file(a.real, "real");
  require_file(a.gen, "gen");
  auto embedder = make_adapter(a.embedder, run, "embedder");
  const ImageManifest real = read_manifest(a.real);
  const ImageManifest gen = read_manifest(a.gen);
  FidReport report = fid_protocol(real, gen, *embedder, a.iterations, run.seed);
  report.model = a.model;
  report.dataset = a.dataset;
  report.axis = a.axis.empty() ? std::string(to_string(gen.axis)) : a.axis;
  const fs::path out = run.out(a.out);
  write_json_atomic(out, report.to_json());
  std::cout << "FID " << format_fid({report.mean_score, report.std_score}) << " over "
            << report.iteration_scores.size() << " iterations -> " << out.string() << "\n";
}

struct RPrecArgs {
  std::string gen, captions, captions_format = "manifest", image_embedder, text_embedder,
                                 out = "rprecision.json", model, dataset, axis;
  std::size_t distractors = kDefaultDistractors;
};

void run_rprecision(const RPrecArgs& a, const RunOptions& run) {
  require_file(a.gen, "gen");
  require_file(a.captions, "captions");
  auto image_embedder = make_adapter(a.image_embedder, run, "image-embedder");
  auto text_embedder = make_adapter(a.text_embedder.empty() ? a.image_embedder : a.text_embedder,
                                    run, "text-embedder");
  const ImageManifest gen = read_manifest(a.gen);
  const CaptionIndex pool = a.captions_format == "manifest"
                                ? index_from_manifest(read_manifest(a.captions))
                                : load_caption_index(a.captions, parse_caption_format(a.captions_format));
  RPrecisionReport report =
      evaluate_rprecision(gen, pool, *image_embedder, *text_embedder, a.distractors, run.seed);
  report.model = a.model;
  report.dataset = a.dataset;
  report.axis = a.axis.empty() ? std::string(to_string(gen.axis)) : a.axis;
  const fs::path out = run.out(a.out);
  write_json_atomic(out, report.to_json());
  std::cout << "R-Precision " << format_rprecision(report.mean_score) << " over "
            << report.per_image_scores.size() << " images -> " << out.string() << "\n";
}

PromptSuite suite_for(const std::string& prompts, const std::string& axis) {
  if (!prompts.empty()) {
    require_file(prompts, "prompts");
    PromptSuite s = load_prompt_suite(prompts);
    if (!axis.empty() && parse_bias_axis(axis) != s.axis) {
      throw Error(ErrorKind::usage, "--axis " + axis + " does not match the suite's axis");
    }
    return s;
  }
  if (axis.empty()) throw Error(ErrorKind::usage, "--axis or --prompts is required");
  return load_prompt_suite(default_prompt_dir() / (axis + ".json"));
}

struct GenerateArgs {
  std::string axis, prompts, generator, out = "audit", label;
  std::size_t per_prompt = kImagesPerPrompt;
};

void run_generate(const GenerateArgs& a, const RunOptions& run) {
  const PromptSuite suite = suite_for(a.prompts, a.axis);
  auto generator = make_adapter(a.generator, run, "generator");
  print_warnings(suite.warnings);
  const fs::path out = run.out(a.out);
  ImageManifest m = generate_audit_images(suite, *generator, a.per_prompt, run.seed, out,
                                          a.label.empty() ? a.generator : a.label);
  m.root = ".";  // the manifest sits next to images/
  write_manifest(out / "manifest.jsonl", m);
  std::cout << "generated " << m.entries.size() << " images -> " << (out / "manifest.jsonl").string()
            << "\n";
}

struct TabulateArgs {
  std::string annotations, axis, prompts, manifest, model, out, format = "markdown";
  std::size_t evaluators = kEvaluatorsPerImage;
};

void run_tabulate(const TabulateArgs& a, const RunOptions& run) {
  require_file(a.annotations, "annotations");
  if (!a.manifest.empty()) require_file(a.manifest, "manifest");
  const CategoryScheme scheme = a.prompts.empty() && !a.axis.empty()
                                    ? CategoryScheme::for_axis(parse_bias_axis(a.axis))
                                    : suite_for(a.prompts, a.axis).scheme;
  std::vector<std::string> expected;
  if (!a.manifest.empty()) {
    for (const auto& e : read_manifest(a.manifest).entries) expected.push_back(e.id);
  }
  AuditReport report = build_audit_report(read_annotations(a.annotations), scheme, a.evaluators, expected);
  report.model = a.model;
  const fs::path out = run.out(a.out.empty() ? "bias_" + std::string(to_string(scheme.axis)) + ".json" : a.out);
  write_json_atomic(out, report.to_json());
  print_warnings(report.pooled.warnings);
  if (!report.consensus.missing.empty()) {
    std::cerr << "warning: " << report.consensus.missing.size() << " images have no annotations\n";
  }
  if (!report.consensus.under_annotated.empty()) {
    std::cerr << "warning: " << report.consensus.under_annotated.size() << " images have fewer than "
              << a.evaluators << " annotations\n";
  }
  std::cout << render_bias(BiasComparison{scheme.axis, {{a.model.empty() ? "(unnamed)" : a.model,
                                                          report.pooled}}},
                           parse_table_format(a.format));
}

struct ServeArgs {
  std::string host = "127.0.0.1", log = "annotations/labels.jsonl", static_dir;
  int port = 8080;
  // Optional task created at startup.
  std::string task_id, manifest, axis;
  std::vector<std::string> evaluators;
  bool show_prompt = false;
};

void run_serve(const ServeArgs& a, const RunOptions& run) {
  if (!a.manifest.empty()) require_file(a.manifest, "manifest");
  AnnotationService service(run.out(a.log));
  if (!a.manifest.empty()) {
    if (a.axis.empty() || a.evaluators.empty()) {
      throw Error(ErrorKind::usage, "--manifest needs --axis and --evaluators");
    }
    TaskRequest req;
    // A stable default id lets a restarted service find its startup task.
    req.task_id = a.task_id.empty() ? "audit-" + a.axis : a.task_id;
    req.manifest_ref = a.manifest;
    req.manifest = read_manifest(a.manifest);
    req.scheme = CategoryScheme::for_axis(parse_bias_axis(a.axis));
    req.evaluators = a.evaluators;
    req.show_prompt = a.show_prompt;
    bool exists = false;
    for (const auto& t : service.list_tasks()) exists = exists || t.task_id == req.task_id;
    if (!exists) std::cout << "created task " << service.create_task(std::move(req)) << "\n";
  }
  httplib::Server server;
  register_annotation_routes(server, service, a.static_dir);
  std::cout << "listening on http://" << a.host << ":" << a.port << std::endl;
  if (!server.listen(a.host, a.port)) {
    throw Error(ErrorKind::input, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  }
}

struct ReportArgs {
  std::vector<std::string> fid, rprecision, bias;
  std::string format = "markdown", out;
};

void run_report(const ReportArgs& a, const RunOptions& run) {
  const TableFormat format = parse_table_format(a.format);
  std::vector<nlohmann::json> docs;
  for (const auto* group : {&a.fid, &a.rprecision, &a.bias}) {
    for (const auto& path : *group) {
      require_file(path, "report");
      docs.push_back(read_json(path));
    }
  }
  const std::string text = render_reports(docs, format);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    const fs::path out = run.out(a.out);
    write_file_atomic(out, text);
    std::cout << "wrote " << out.string() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit text-to-image models: dataset filtering, feature crops, FID, R-Precision, "
               "and bias annotation."};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);

  RunOptions run;
  app.add_option("--output-root", run.output_root, "Root for run artifacts")->capture_default_str();
  app.add_option("--run-id", run.run_id, "Run directory name (default run-<seed>)");
  app.add_option("--seed", run.seed, "Run seed recorded in every artifact")->capture_default_str();
  app.add_option("--jobs", run.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--timeout", run.timeout_s, "Adapter timeout in seconds")->capture_default_str();
  app.add_option("--adapter-param", run.adapter_params, "key=value passed in adapter requests");

  IngestArgs ingest;
  auto* ci = app.add_subcommand("ingest", "Filter a caption dataset into a manifest");
  ci->add_option("--annotations", ingest.annotations, "COCO json or Flickr caption table");
  ci->add_option("--format", ingest.format, "coco_json|flickr_tsv")->capture_default_str();
  ci->add_option("--categories", ingest.categories, "Category names (union)")->delimiter(',');
  ci->add_option("--keywords", ingest.keywords, "Whole-word caption keywords")->delimiter(',');
  ci->add_option("--preset", ingest.preset, "face|motion keywords, or sport categories");
  ci->add_option("--count", ingest.count, "Maximum entries")->capture_default_str();
  ci->add_option("--axis", ingest.axis, "face|motion|bias|other")->capture_default_str();
  ci->add_option("--name", ingest.name, "Manifest source name");
  ci->add_option("--image-root", ingest.image_root, "Directory image paths are relative to");
  ci->add_option("--out", ingest.out, "Manifest file");

  ExtractArgs extract;
  auto* ce = app.add_subcommand("extract", "Crop face, eyes, mouth and nose regions");
  ce->add_option("--manifest", extract.manifest, "Image manifest");
  ce->add_option("--detections", extract.detections, "Detection records file");
  ce->add_option("--detector", extract.detector, "Detector adapter command (or 'mock')");
  ce->add_option("--features", extract.features, "face,eyes,mouth,nose")->delimiter(',');
  ce->add_option("--width", extract.width, "Required crop width")->capture_default_str();
  ce->add_option("--height", extract.height, "Required crop height")->capture_default_str();
  ce->add_option("--out", extract.out, "Output directory")->capture_default_str();

  FidArgs fid;
  auto* cf = app.add_subcommand("fid", "Repeated-sampling FID between two manifests");
  cf->add_option("--real", fid.real, "Real image manifest");
  cf->add_option("--gen", fid.gen, "Generated image manifest");
  cf->add_option("--embedder", fid.embedder, "Image embedder adapter command (or 'mock')");
  cf->add_option("--iterations", fid.iterations, "Sampling iterations")->capture_default_str();
  cf->add_option("--model", fid.model, "Model label for tables");
  cf->add_option("--dataset", fid.dataset, "Dataset label for tables");
  cf->add_option("--axis", fid.axis, "face|motion (default: the manifest axis)");
  cf->add_option("--out", fid.out, "Report file")->capture_default_str();

  RPrecArgs rp;
  auto* cr = app.add_subcommand("rprecision", "Reciprocal-rank R-Precision against distractor captions");
  cr->add_option("--gen", rp.gen, "Generated image manifest (first caption = prompt)");
  cr->add_option("--captions", rp.captions, "Distractor caption pool");
  cr->add_option("--captions-format", rp.captions_format, "manifest|coco_json|flickr_tsv")->capture_default_str();
  cr->add_option("--image-embedder", rp.image_embedder, "Image embedder adapter command");
  cr->add_option("--text-embedder", rp.text_embedder, "Text embedder (default: image embedder)");
  cr->add_option("--distractors", rp.distractors, "Distractors per image")->capture_default_str();
  cr->add_option("--model", rp.model, "Model label for tables");
  cr->add_option("--dataset", rp.dataset, "Dataset label for tables");
  cr->add_option("--axis", rp.axis, "face|motion (default: the manifest axis)");
  cr->add_option("--out", rp.out, "Report file")->capture_default_str();

  auto* ca = app.add_subcommand("audit", "Bias audit");
  ca->require_subcommand(1);
  GenerateArgs gen;
  auto* cg = ca->add_subcommand("generate", "Generate images for a prompt suite");
  cg->add_option("--axis", gen.axis, "gender|race (selects the shipped suite)");
  cg->add_option("--prompts", gen.prompts, "Custom prompt suite file");
  cg->add_option("--generator", gen.generator, "Generator adapter command (or 'mock')");
  cg->add_option("--per-prompt", gen.per_prompt, "Images per prompt")->capture_default_str();
  cg->add_option("--label", gen.label, "Adapter identity recorded in the receipt");
  cg->add_option("--out", gen.out, "Output directory")->capture_default_str();
  TabulateArgs tab;
  auto* ct = ca->add_subcommand("tabulate", "Aggregate evaluator labels into a bias table");
  ct->add_option("--annotations", tab.annotations, "Annotation records file");
  ct->add_option("--axis", tab.axis, "gender|race");
  ct->add_option("--prompts", tab.prompts, "Prompt suite supplying the category scheme");
  ct->add_option("--manifest", tab.manifest, "Audit manifest (reports unannotated images)");
  ct->add_option("--evaluators", tab.evaluators, "Expected evaluators per image")->capture_default_str();
  ct->add_option("--model", tab.model, "Model label for tables");
  ct->add_option("--format", tab.format, "markdown|csv|machine")->capture_default_str();
  ct->add_option("--out", tab.out, "Report file (default bias_<axis>.json)");

  ServeArgs serve;
  auto* cs = app.add_subcommand("serve", "Run the annotation service");
  cs->add_option("--host", serve.host, "Bind address")->capture_default_str();
  cs->add_option("--port", serve.port, "Port")->capture_default_str();
  cs->add_option("--log", serve.log, "Append-only label log")->capture_default_str();
  cs->add_option("--static", serve.static_dir, "Browser bundle directory served at /");
  cs->add_option("--manifest", serve.manifest, "Create a task for this manifest at startup");
  cs->add_option("--task-id", serve.task_id, "Id of the startup task");
  cs->add_option("--axis", serve.axis, "gender|race for the startup task");
  cs->add_option("--evaluators", serve.evaluators, "Evaluator ids for the startup task")->delimiter(',');
  cs->add_flag("--show-prompt", serve.show_prompt, "Show prompts to evaluators");

  ReportArgs report;
  auto* cp = app.add_subcommand("report", "Render reports as comparison tables");
  cp->add_option("--fid", report.fid, "FID report files");
  cp->add_option("--rprecision", report.rprecision, "R-Precision report files");
  cp->add_option("--bias", report.bias, "Bias report files");
  cp->add_option("--format", report.format, "markdown|csv|machine")->capture_default_str();
  cp->add_option("--out", report.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return exit_code(ErrorKind::usage);
  }

  try {
    if (ci->parsed()) run_ingest(ingest, run);
    if (ce->parsed()) run_extract(extract, run);
    if (cf->parsed()) run_fid(fid, run);
    if (cr->parsed()) run_rprecision(rp, run);
    if (cg->parsed()) run_generate(gen, run);
    if (ct->parsed()) run_tabulate(tab, run);
    if (cs->parsed()) run_serve(serve, run);
    if (cp->parsed()) run_report(report, run);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::input);
  }
  return 0;
}
