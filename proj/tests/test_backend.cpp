/**
 * Copyright 2026 The agic Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "agic/backend.hpp"
#include "test_util.hpp"

namespace agic {
namespace {

using testing::chain_bundle;
using testing::TempDir;

const std::string kToyFixture = std::string(AGIC_DATA_DIR) + "/fixture.json";

TEST(Fixture, SaveLoadRoundTrip) {
  const FixtureBundle b = chain_bundle({"a", "b"}, {2, 3, 1});
  TempDir dir;
  save_fixture(b, dir.file("f.json"));
  const FixtureBundle loaded = load_fixture(dir.file("f.json"));
  EXPECT_EQ(loaded, b);
  // re-serializing what was loaded reproduces the file byte for byte
  EXPECT_EQ(serialize_fixture(loaded), read_text_file(dir.file("f.json")));
}

TEST(Fixture, ToyFixtureLoads) {
  const FixtureBundle b = load_fixture(kToyFixture);
  EXPECT_EQ(b.descriptor.vocab_size, b.vocab.size());
  EXPECT_EQ(b.attention.size(), 5u);
  for (const auto& [id, stack] : b.attention) {
    EXPECT_EQ(stack.num_tokens(), b.descriptor.patch_grid_side * b.descriptor.patch_grid_side + 1);
  }
  EXPECT_EQ(parse_fixture(serialize_fixture(b)), b);
}

std::string mutated(const std::string& text, const std::function<void(nlohmann::json&)>& edit) {
  auto doc = nlohmann::json::parse(text);
  edit(doc);
  return doc.dump();
}

void expect_rejected_at(const std::string& text, const std::string& where) {
  try {
    parse_fixture(text);
    ADD_FAILURE() << "accepted a bundle that should fail at " << where;
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.where(), where) << e.what();
  }
}

TEST(Fixture, SingleFieldMutationsAreRejectedWithTheirPath) {
  const std::string good = serialize_fixture(chain_bundle({"img"}, {2, 3, 1}));
  ASSERT_NO_THROW(parse_fixture(good));
  using J = nlohmann::json;
  expect_rejected_at(mutated(good, [](J& d) { d["descriptor"]["vocab_size"] = 7; }), "/vocab");
  expect_rejected_at(mutated(good, [](J& d) { d["descriptor"].erase("eos_token"); }),
                     "/descriptor/eos_token");
  expect_rejected_at(mutated(good, [](J& d) { d["vocab"][3] = 5; }), "/vocab/3");
  expect_rejected_at(mutated(good, [](J& d) { d["images"]["img"]["attention"][1][0][2][3] = 0.9; }),
                     "/images/img/attention/1/0/2");
  expect_rejected_at(mutated(good, [](J& d) { d["images"]["img"]["attention"][0][1][0][0] = -0.5; }),
                     "/images/img/attention/0/1/0/0");
  expect_rejected_at(mutated(good, [](J& d) { d["logit_rules"][1]["prefix"][0] = 2; }),
                     "/logit_rules/1/prefix");
  expect_rejected_at(mutated(good, [](J& d) { d["logit_rules"][0]["prefix"][0] = 99; }),
                     "/logit_rules/0/prefix");
  expect_rejected_at(mutated(good, [](J& d) { d["logit_rules"][2]["logits"].erase(0); }),
                     "/logit_rules/2/logits");
  expect_rejected_at(mutated(good, [](J& d) { d["logit_rules"][0]["image_id"] = "ghost"; }),
                     "/logit_rules/0/image_id");
  expect_rejected_at(mutated(good, [](J& d) { d["fallback_logits"][2] = "x"; }),
                     "/fallback_logits/2");
  expect_rejected_at(mutated(good, [](J& d) { d["logit_rules"].push_back(d["logit_rules"][0]); }),
                     "/logit_rules/3");
}

TEST(Fixture, PointerEscapesImageIds) {
  FixtureBundle b = chain_bundle({"a/b~c"}, {2});
  auto doc = nlohmann::json::parse(serialize_fixture(b));
  doc["images"]["a/b~c"]["attention"][0][0][0][0] = 3.0;
  expect_rejected_at(doc.dump(), "/images/a~1b~0c/attention/0/0/0/0");
}

TEST(Fixture, MalformedJsonIsAValidationError) {
  EXPECT_THROW(parse_fixture("{\"descriptor\": "), ValidationError);
  EXPECT_THROW(parse_fixture("[1, 2]"), ValidationError);
  EXPECT_THROW(load_fixture("/nonexistent/fixture.json"), IoError);
}

TEST(FixtureBackend, EncodeChecksDimensionsAndId) {
  const FixtureBackend backend(chain_bundle({"img"}, {2, 1}));
  const ImageTensor ok(8, 8, 3, {0.0, 1.0});
  const Encoding enc = backend.encode("img", ok);
  EXPECT_EQ(enc.attention, backend.bundle().attention.at("img"));
  EXPECT_EQ(enc.state.image_id, "img");
  EXPECT_THROW(backend.encode("img", ImageTensor(8, 9, 3, {0.0, 1.0})), DimensionError);
  try {
    backend.encode("nope", ok);
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
}

TEST(FixtureBackend, StepLookupOrder) {
  FixtureBundle b = chain_bundle({"img", "other"}, {2, 1});
  b.logit_rules.push_back({"img", {0}, {0, 0, 0, 9, 0, 0}});
  const FixtureBackend backend(b);
  const std::vector<TokenId> root{0};
  EXPECT_EQ(backend.step({"img", nullptr}, root), (std::vector<double>{0, 0, 0, 9, 0, 0}));
  EXPECT_EQ(backend.step({"other", nullptr}, root)[2], 5.0);
  const std::vector<TokenId> unknown{0, 4, 4};
  EXPECT_EQ(backend.step({"img", nullptr}, unknown), b.fallback_logits);
}

TEST(FixtureBackend, DecodeAndDetokenize) {
  const FixtureBackend backend(chain_bundle({"img"}, {2, 3, 1}));
  DecoderConfig cfg;
  cfg.top_k = 1;
  const DecodeResult r = decode(backend, {"img", nullptr}, cfg);
  EXPECT_EQ(r.best.tokens, (std::vector<TokenId>{2, 3, 1}));
  EXPECT_EQ(detokenize(backend, r.best.tokens), "w2 w3");
  EXPECT_THROW(backend.token_text(42), IndexError);
}

TEST(FixtureBackend, ToyWorkedExampleTable) {
  const FixtureBackend backend = FixtureBackend::from_file(kToyFixture);
  DecoderConfig cfg;
  cfg.top_k = 1;
  const DecodeResult r = decode(backend, {"girls.png", nullptr}, cfg);
  EXPECT_EQ(detokenize(backend, r.best.tokens), "two girls");
}

}  // namespace
}  // namespace agic
