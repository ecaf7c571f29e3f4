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
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "t2i/adapters.hpp"

namespace t2i {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using std::chrono::milliseconds;
using testing::error_kind_of;
using testing::error_message_of;
using testing::TempDir;
using Params = std::map<std::string, std::string>;

std::vector<AdapterItem> items_of(std::initializer_list<const char*> ids) {
  std::vector<AdapterItem> out;
  for (const char* id : ids) out.push_back({id, std::string("payload ") + id});
  return out;
}

// Writes an executable shell script and returns a command line for it.
std::string script(const TempDir& dir, const std::string& name, const std::string& body) {
  const fs::path p = dir / name;
  write_file_atomic(p, "#!/bin/sh\n" + body + "\n");
  fs::permissions(p, fs::perms::owner_all);
  return "/bin/sh " + p.string();
}

TEST(ProtocolTest, RequestRoundTrip) {
  AdapterRequest req;
  req.mode = AdapterMode::detect;
  req.items = items_of({"a", "b"});
  req.params = {{"k", "v"}};
  req.seed = 0xfedcba9876543210ull;
  const json j = request_to_json(req);
  EXPECT_EQ(j.at("mode"), "detect");
  EXPECT_EQ(j.at("items").at(1).at("payload"), "payload b");
  EXPECT_EQ(request_from_json(j), req);
  TempDir dir;
  write_request(dir / "r.json", req);
  EXPECT_EQ(read_request(dir / "r.json"), req);
}

TEST(ProtocolTest, ModeNames) {
  for (auto m : {AdapterMode::generate, AdapterMode::detect, AdapterMode::embed_image,
                 AdapterMode::embed_text}) {
    EXPECT_EQ(parse_adapter_mode(to_string(m)), m);
  }
  EXPECT_EQ(error_kind_of([] { parse_adapter_mode("paint"); }), ErrorKind::protocol);
}

TEST(ProtocolTest, MalformedDocumentsAreProtocolErrors) {
  EXPECT_EQ(error_kind_of([] { request_from_json(json{{"mode", "detect"}}); }),
            ErrorKind::protocol);
  EXPECT_EQ(error_kind_of([] { response_from_json(json{{"mode", "detect"}, {"items", json::array()}}); }),
            ErrorKind::protocol);
}

TEST(ProtocolTest, EmbedResponseRoundTripsThroughSidecar) {
  AdapterRequest req;
  req.mode = AdapterMode::embed_text;
  req.items = items_of({"c:1", "c:2#1"});
  AdapterResponse resp = mock_embedder(req);
  TempDir dir;
  write_response(dir / "response.json", resp);
  EXPECT_TRUE(fs::exists(dir / "response.json.emb"));
  const json on_disk = read_json(dir / "response.json");
  EXPECT_EQ(on_disk.at("items").at(0).at("result"), "response.json.emb");
  EXPECT_EQ(on_disk.at("meta").at("embedding_dim"), kMockEmbeddingDim);
  EXPECT_EQ(on_disk.at("meta").at("input_size"), json::array({299, 299}));
  const AdapterResponse back = read_response(dir / "response.json");
  EXPECT_EQ(back.embeddings, resp.embeddings);
  EXPECT_EQ(back.meta, resp.meta);
  validate_response(req, back);
}

TEST(SidecarTest, LayoutIsBitExact) {
  const std::string bytes = encode_sidecar(2, {{"a", {1.0f, -0.5f}}});
  std::string expected(kSidecarMagic);
  const unsigned char tail[] = {2, 0, 0, 0, 1, 0, 0, 0, 'a', 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xbf};
  expected.append(reinterpret_cast<const char*>(tail), sizeof tail);
  EXPECT_EQ(bytes, expected);
}

TEST(SidecarTest, RoundTripPreservesEveryBit) {
  std::vector<SidecarRecord> recs = {
      {"x", {0.1f, -0.0f, 1e-38f, 3.4e38f}},
      {"longer id with spaces", {std::nextafter(1.0f, 2.0f), -1.0f, 0.0f, 7.25f}},
  };
  std::size_t dim = 0;
  const auto back = decode_sidecar(encode_sidecar(4, recs), &dim);
  EXPECT_EQ(dim, 4u);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].id, recs[i].id);
    EXPECT_EQ(std::memcmp(back[i].values.data(), recs[i].values.data(), 4 * sizeof(float)), 0);
  }
}

TEST(SidecarTest, CorruptionIsProtocolError) {
  const std::string good = encode_sidecar(2, {{"a", {1.0f, 2.0f}}});
  EXPECT_EQ(error_kind_of([&] { decode_sidecar("T2IEMB2\n\2\0\0\0"); }), ErrorKind::protocol);
  EXPECT_EQ(error_kind_of([&] { decode_sidecar(good.substr(0, good.size() - 1)); }),
            ErrorKind::protocol);
  EXPECT_EQ(error_kind_of([&] { decode_sidecar(good + "x"); }), ErrorKind::protocol);
  EXPECT_EQ(error_kind_of([&] { encode_sidecar(3, {{"a", {1.0f}}}); }), ErrorKind::protocol);
}

TEST(ValidateTest, IdsMustFormABijection) {
  AdapterRequest req;
  req.mode = AdapterMode::embed_image;
  req.items = items_of({"a", "b"});
  const AdapterResponse good = mock_embedder(req);
  validate_response(req, good);

  AdapterResponse missing = good;
  missing.items.pop_back();
  EXPECT_NE(error_message_of([&] { validate_response(req, missing); }).find("'b'"),
            std::string::npos);

  AdapterResponse extra = good;
  extra.items.push_back({"z", nullptr});
  extra.embeddings["z"] = good.embeddings.at("a");
  EXPECT_EQ(error_kind_of([&] { validate_response(req, extra); }), ErrorKind::protocol);

  AdapterResponse repeated = good;
  repeated.items[1].id = "a";
  EXPECT_EQ(error_kind_of([&] { validate_response(req, repeated); }), ErrorKind::protocol);

  AdapterResponse wrong_mode = good;
  wrong_mode.mode = AdapterMode::embed_text;
  EXPECT_EQ(error_kind_of([&] { validate_response(req, wrong_mode); }), ErrorKind::protocol);

  AdapterResponse short_vec = good;
  short_vec.embeddings["a"].pop_back();
  EXPECT_EQ(error_kind_of([&] { validate_response(req, short_vec); }), ErrorKind::protocol);

  AdapterResponse nan_vec = good;
  nan_vec.embeddings["a"][0] = std::nanf("");
  EXPECT_EQ(error_kind_of([&] { validate_response(req, nan_vec); }), ErrorKind::protocol);
}

TEST(ValidateTest, DuplicateRequestIdsAreRejected) {
  AdapterRequest req;
  req.mode = AdapterMode::embed_image;
  req.items = items_of({"a", "a"});
  EXPECT_EQ(error_kind_of([&] { MockAdapter().call(req); }), ErrorKind::protocol);
}

TEST(CommandTest, SplitHonorsQuotes) {
  EXPECT_EQ(split_command("python3  -m  pkg.adapter"),
            (std::vector<std::string>{"python3", "-m", "pkg.adapter"}));
  EXPECT_EQ(split_command("run 'a b' \"c d\" e"),
            (std::vector<std::string>{"run", "a b", "c d", "e"}));
  EXPECT_EQ(error_kind_of([] { split_command("run 'open"); }), ErrorKind::usage);
  EXPECT_TRUE(split_command("   ").empty());
}

// --- mocks ----------------------------------------------------------------------

TEST(MockTest, EmbeddingsArePureFunctionsOfIdAndSeed) {
  const Embedding a = mock_embedding("i:1", 16, 7, false);
  EXPECT_EQ(a, mock_embedding("i:1", 16, 7, false));
  EXPECT_NE(a, mock_embedding("i:1", 16, 8, false));
  EXPECT_NE(a, mock_embedding("i:2", 16, 7, false));
  for (float x : a) {
    EXPECT_GE(x, -1.0f);
    EXPECT_LT(x, 1.0f);
  }
}

TEST(MockTest, PairedModeMapsCaptionsOntoImages) {
  EXPECT_EQ(mock_embedding("c:5", 8, 3, true), mock_embedding("i:5", 8, 3, true));
  EXPECT_NE(mock_embedding("c:5", 8, 3, false), mock_embedding("i:5", 8, 3, false));
}

TEST(MockTest, EmbedItemsBatchesWithoutChangingResults) {
  MockAdapter mock(Params{{"dim", "8"}});
  std::vector<AdapterItem> items;
  for (int i = 0; i < 10; ++i) items.push_back({"i:" + std::to_string(i), ""});
  const auto whole = embed_items(mock, AdapterMode::embed_image, items, 11, 0);
  const auto batched = embed_items(mock, AdapterMode::embed_image, items, 11, 3);
  EXPECT_EQ(whole.vectors, batched.vectors);
  EXPECT_EQ(whole.vectors.size(), 10u);
  EXPECT_EQ(whole.meta.embedding_dim, 8u);
  EXPECT_EQ(error_kind_of([&] { embed_items(mock, AdapterMode::detect, items, 1); }),
            ErrorKind::usage);
}

TEST(MockTest, GeneratorIsDeterministic) {
  TempDir a, b;
  MockAdapter mock(Params{{"size", "32"}});
  const auto items = std::vector<AdapterItem>{{"0_0", "a doctor"}, {"0_1", "a doctor"}};
  const auto ga = generate_items(mock, items, a.path(), 5);
  const auto gb = generate_items(mock, items, b.path(), 5);
  ASSERT_EQ(ga.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ga[i].id, items[i].id);
    EXPECT_EQ(read_file(ga[i].path), read_file(gb[i].path));
    EXPECT_EQ(read_png(ga[i].path).width, 32);
  }
  EXPECT_NE(read_file(ga[0].path), read_file(ga[1].path));
  EXPECT_EQ(mock_image("a doctor", 1, 5, 32), read_png(ga[1].path));
}

TEST(MockTest, GeneratorRequiresOutputDirectory) {
  AdapterRequest req;
  req.mode = AdapterMode::generate;
  req.items = items_of({"0_0"});
  EXPECT_EQ(error_kind_of([&] { mock_generator(req); }), ErrorKind::usage);
}

TEST(MockTest, DetectorFailureRatesAreExact) {
  TempDir dir;
  std::vector<AdapterItem> items;
  for (int i = 0; i < 20; ++i) {
    const fs::path p = dir / (std::to_string(i) + ".png");
    write_png(p, mock_image("x", static_cast<std::size_t>(i), 0, 200));
    items.push_back({std::to_string(i), p.string()});
  }
  MockAdapter mock(Params{{"no_face_rate", "0.25"}, {"mouth_fail_rate", "0.1"}});
  const DetectionMap dets = detect_items(mock, items, 9);
  ASSERT_EQ(dets.size(), 20u);
  std::size_t none = 0, narrow_mouth = 0;
  for (const auto& [id, d] : dets) {
    if (!d) {
      ++none;
      continue;
    }
    validate_detection(*d);
    EXPECT_EQ(d->image_id, id);
    if (d->landmarks.mouth_right->x - d->landmarks.mouth_left->x < 35) ++narrow_mouth;
  }
  EXPECT_EQ(none, 5u);
  EXPECT_EQ(narrow_mouth, 2u);
  EXPECT_EQ(detect_items(mock, items, 9), dets);
}

// --- subprocess ---------------------------------------------------------------

TEST(SubprocessTest, MockAdapterBinaryMatchesInProcessMock) {
  AdapterRequest req;
  req.mode = AdapterMode::embed_text;
  req.items = items_of({"c:1", "c:2", "c:3"});
  req.seed = 99;
  SubprocessAdapter proc(T2I_MOCK_ADAPTER, milliseconds(20000), {{"paired", "1"}});
  MockAdapter local(Params{{"paired", "1"}});
  const AdapterResponse a = proc.call(req);
  const AdapterResponse b = local.call(req);
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.meta, b.meta);
}

TEST(SubprocessTest, NonzeroExitIsAdapterErrorWithStderr) {
  TempDir dir;
  const std::string cmd = script(dir, "fail.sh", "echo 'model weights missing' >&2\nexit 2");
  AdapterRequest req;
  req.items = items_of({"i:1"});
  std::string msg;
  try {
    invoke_adapter(cmd, req, milliseconds(10000));
    ADD_FAILURE() << "expected failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::adapter);
    EXPECT_EQ(exit_code(e.kind()), 4);
    msg = e.what();
  }
  EXPECT_NE(msg.find("status 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("model weights missing"), std::string::npos) << msg;
}

TEST(SubprocessTest, MissingExecutableIsAdapterError) {
  AdapterRequest req;
  req.items = items_of({"i:1"});
  EXPECT_EQ(error_kind_of([&] {
              invoke_adapter("/nonexistent/adapter-binary", req, milliseconds(10000));
            }),
            ErrorKind::adapter);
}

TEST(SubprocessTest, SlowAdapterTimesOut) {
  TempDir dir;
  const std::string cmd = script(dir, "slow.sh", "sleep 30");
  AdapterRequest req;
  req.items = items_of({"i:1"});
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(error_kind_of([&] { invoke_adapter(cmd, req, milliseconds(300)); }),
            ErrorKind::timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST(SubprocessTest, MissingResponseIsProtocolError) {
  TempDir dir;
  const std::string cmd = script(dir, "quiet.sh", "exit 0");
  AdapterRequest req;
  req.items = items_of({"i:1"});
  EXPECT_EQ(error_kind_of([&] { invoke_adapter(cmd, req, milliseconds(10000)); }),
            ErrorKind::protocol);
}

TEST(SubprocessTest, ResponseWithForeignIdIsProtocolError) {
  TempDir dir;
  // Echoes a detect response that answers for the wrong image.
  const std::string body =
      "while [ $# -gt 0 ]; do [ \"$1\" = --output ] && out=$2; shift; done\n"
      "printf '%s' '{\"mode\":\"detect\",\"items\":[{\"id\":\"other\",\"result\":{\"no_face\":true}}],"
      "\"meta\":{\"adapter_name\":\"sh\",\"adapter_version\":\"0\"}}' > \"$out\"";
  const std::string cmd = script(dir, "liar.sh", body);
  AdapterRequest req;
  req.mode = AdapterMode::detect;
  req.items = items_of({"mine"});
  const std::string msg = error_message_of([&] { invoke_adapter(cmd, req, milliseconds(10000)); });
  EXPECT_NE(msg.find("'other'"), std::string::npos) << msg;
}

}  // namespace
}  // namespace t2i
