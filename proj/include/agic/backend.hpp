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
#pragma once

// Model backend contract and the deterministic fixture backend that replays
// attention stacks and next-token logit tables from an interchange file.
//
// A native backend (real vision encoder + language decoder) implements
// ModelBackend: encode() runs the encoder and returns its self-attention,
// step() runs one decoder step. Nothing else in the pipeline changes.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "agic/amplifier.hpp"
#include "agic/attention.hpp"
#include "agic/decoder.hpp"
#include "agic/error.hpp"

namespace agic {

struct BackendDescriptor {
  std::size_t vocab_size = 0;
  TokenId eos_token = 1;
  TokenId bos_token = 0;
  std::size_t patch_grid_side = 0;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  ValueRange value_range;

  SpecialTokens special() const { return {bos_token, eos_token}; }

  bool operator==(const BackendDescriptor&) const = default;
};

// Opaque per-image state handed from encode() to step().
struct EncoderState {
  std::string image_id;
  std::shared_ptr<const void> payload;
};

struct Encoding {
  AttentionStack attention;
  EncoderState state;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;
  virtual Encoding encode(std::string_view image_id, const ImageTensor& image) const = 0;
  virtual std::vector<double> step(const EncoderState& state,
                                   std::span<const TokenId> prefix) const = 0;
  virtual std::string token_text(TokenId token) const = 0;
};

inline DecodeResult decode(const ModelBackend& backend, const EncoderState& state,
                           const DecoderConfig& config) {
  return decode(
      [&](std::span<const TokenId> prefix) { return backend.step(state, prefix); },
      backend.descriptor().special(), config);
}

// Space-joined vocabulary strings with BOS and EOS removed.
inline std::string detokenize(const ModelBackend& backend, std::span<const TokenId> tokens) {
  const auto& d = backend.descriptor();
  std::string out;
  for (TokenId t : tokens) {
    if (t == d.bos_token || t == d.eos_token) continue;
    if (!out.empty()) out += ' ';
    out += backend.token_text(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixture bundle

// Rules with this image id apply to every image; a rule naming the image
// itself takes precedence.
inline constexpr std::string_view kAnyImage = "*";

struct LogitRule {
  std::string image_id;
  std::vector<TokenId> prefix;  // starts with BOS
  std::vector<double> logits;

  bool operator==(const LogitRule&) const = default;
};

struct FixtureBundle {
  BackendDescriptor descriptor;
  std::vector<std::string> vocab;  // token id -> text
  std::map<std::string, AttentionStack> attention;
  std::vector<LogitRule> logit_rules;
  std::vector<double> fallback_logits;

  bool operator==(const FixtureBundle&) const = default;
};

namespace detail {

// Files carry 32-bit floats.
using FixtureJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                         std::uint64_t, float>;

inline std::string pointer_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

inline const FixtureJson& require(const FixtureJson& obj, const char* key,
                                  const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + "/" + key, "missing key");
  return *it;
}

inline std::uint64_t as_uint(const FixtureJson& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ValidationError(where, "expected a non-negative integer");
}

inline double as_real(const FixtureJson& v, const std::string& where) {
  if (!v.is_number()) throw ValidationError(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(where, "number is not finite");
  return d;
}

inline const FixtureJson& as_array(const FixtureJson& v, const std::string& where,
                                   std::size_t expected_size = static_cast<std::size_t>(-1)) {
  if (!v.is_array()) throw ValidationError(where, "expected an array");
  if (expected_size != static_cast<std::size_t>(-1) && v.size() != expected_size) {
    throw ValidationError(where, "expected " + std::to_string(expected_size) +
                                     " elements, found " + std::to_string(v.size()));
  }
  return v;
}

inline std::vector<double> real_vector(const FixtureJson& v, const std::string& where,
                                       std::size_t expected_size) {
  as_array(v, where, expected_size);
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_real(v[i], where + "/" + std::to_string(i)));
  }
  return out;
}

inline BackendDescriptor parse_descriptor(const FixtureJson& d) {
  const std::string at = "/descriptor";
  BackendDescriptor out;
  out.vocab_size = as_uint(require(d, "vocab_size", at), at + "/vocab_size");
  out.eos_token = static_cast<TokenId>(as_uint(require(d, "eos_token", at), at + "/eos_token"));
  out.bos_token = static_cast<TokenId>(as_uint(require(d, "bos_token", at), at + "/bos_token"));
  out.patch_grid_side =
      as_uint(require(d, "patch_grid_side", at), at + "/patch_grid_side");
  out.input_height = as_uint(require(d, "input_height", at), at + "/input_height");
  out.input_width = as_uint(require(d, "input_width", at), at + "/input_width");
  const auto& range = as_array(require(d, "value_range", at), at + "/value_range", 2);
  out.value_range.lo = as_real(range[0], at + "/value_range/0");
  out.value_range.hi = as_real(range[1], at + "/value_range/1");

  if (out.vocab_size == 0) throw ValidationError(at + "/vocab_size", "must be positive");
  if (out.eos_token >= out.vocab_size) {
    throw ValidationError(at + "/eos_token", "must be smaller than vocab_size");
  }
  if (out.bos_token >= out.vocab_size) {
    throw ValidationError(at + "/bos_token", "must be smaller than vocab_size");
  }
  if (out.bos_token == out.eos_token) {
    throw ValidationError(at + "/eos_token", "must differ from bos_token");
  }
  if (out.patch_grid_side == 0) throw ValidationError(at + "/patch_grid_side", "must be positive");
  if (out.input_height < out.patch_grid_side) {
    throw ValidationError(at + "/input_height", "must be at least patch_grid_side");
  }
  if (out.input_width < out.patch_grid_side) {
    throw ValidationError(at + "/input_width", "must be at least patch_grid_side");
  }
  if (!(out.value_range.lo < out.value_range.hi)) {
    throw ValidationError(at + "/value_range", "lower bound must be below upper bound");
  }
  return out;
}

inline AttentionStack parse_attention(const FixtureJson& a, const std::string& at,
                                      std::size_t expected_tokens) {
  as_array(a, at);
  const std::size_t layers = a.size();
  if (layers == 0) throw ValidationError(at, "attention stack has no layers");
  const std::size_t heads = as_array(a[0], at + "/0").size();
  if (heads == 0) throw ValidationError(at + "/0", "attention layer has no heads");
  AttentionStack stack(layers, heads, expected_tokens);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string al = at + "/" + std::to_string(l);
    as_array(a[l], al, heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::string ah = al + "/" + std::to_string(h);
      as_array(a[l][h], ah, expected_tokens);
      for (std::size_t r = 0; r < expected_tokens; ++r) {
        const std::string ar = ah + "/" + std::to_string(r);
        const auto& row = as_array(a[l][h][r], ar, expected_tokens);
        for (std::size_t c = 0; c < expected_tokens; ++c) {
          stack.at(l, h, r, c) = as_real(row[c], ar + "/" + std::to_string(c));
        }
      }
    }
  }
  validate(stack, at);
  return stack;
}

inline void check_logits(const std::vector<double>& logits, std::size_t vocab,
                         const std::string& at) {
  if (logits.size() != vocab) {
    throw ValidationError(at, "expected " + std::to_string(vocab) + " logits, found " +
                                  std::to_string(logits.size()));
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      throw ValidationError(at + "/" + std::to_string(i), "logit is not finite");
    }
  }
}

}  // namespace detail

// Runs every bundle invariant on an in-memory bundle.
inline void validate(const FixtureBundle& b) {
  const auto& d = b.descriptor;
  if (d.vocab_size == 0) throw ValidationError("/descriptor/vocab_size", "must be positive");
  if (d.eos_token >= d.vocab_size || d.bos_token >= d.vocab_size) {
    throw ValidationError("/descriptor", "special tokens must be smaller than vocab_size");
  }
  if (b.vocab.size() != d.vocab_size) {
    throw ValidationError("/vocab", "expected " + std::to_string(d.vocab_size) +
                                        " entries, found " + std::to_string(b.vocab.size()));
  }
  const std::size_t tokens = d.patch_grid_side * d.patch_grid_side + 1;
  for (const auto& [id, stack] : b.attention) {
    const std::string at = "/images/" + detail::pointer_escape(id) + "/attention";
    if (stack.num_tokens() != tokens) {
      throw ValidationError(at, "expected " + std::to_string(tokens) + " tokens per row, found " +
                                    std::to_string(stack.num_tokens()));
    }
    validate(stack, at);
  }
  std::map<std::pair<std::string, std::vector<TokenId>>, std::size_t> seen;
  for (std::size_t i = 0; i < b.logit_rules.size(); ++i) {
    const auto& rule = b.logit_rules[i];
    const std::string at = "/logit_rules/" + std::to_string(i);
    if (rule.image_id != kAnyImage && !b.attention.count(rule.image_id)) {
      throw ValidationError(at + "/image_id", "unknown image id '" + rule.image_id + "'");
    }
    if (rule.prefix.empty() || rule.prefix.front() != d.bos_token) {
      throw ValidationError(at + "/prefix", "prefix must start with bos_token");
    }
    for (std::size_t k = 0; k < rule.prefix.size(); ++k) {
      if (rule.prefix[k] >= d.vocab_size) {
        throw ValidationError(at + "/prefix/" + std::to_string(k), "token id out of range");
      }
    }
    if (!seen.emplace(std::make_pair(rule.image_id, rule.prefix), i).second) {
      throw ValidationError(at, "duplicate rule for this image id and prefix");
    }
    detail::check_logits(rule.logits, d.vocab_size, at + "/logits");
  }
  detail::check_logits(b.fallback_logits, d.vocab_size, "/fallback_logits");
}

inline FixtureBundle parse_fixture(std::string_view text) {
  detail::FixtureJson doc;
  try {
    doc = detail::FixtureJson::parse(text);
  } catch (const nlohmann::detail::parse_error& e) {
    throw ValidationError("byte " + std::to_string(e.byte), std::string("malformed JSON: ") +
                                                                e.what());
  }
  if (!doc.is_object()) throw ValidationError("", "fixture document must be a JSON object");

  FixtureBundle b;
  b.descriptor = detail::parse_descriptor(detail::require(doc, "descriptor", ""));
  const std::size_t vocab_size = b.descriptor.vocab_size;

  const auto& vocab = detail::as_array(detail::require(doc, "vocab", ""), "/vocab", vocab_size);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (!vocab[i].is_string()) {
      throw ValidationError("/vocab/" + std::to_string(i), "expected a string");
    }
    b.vocab.push_back(vocab[i].get<std::string>());
  }

  const auto& images = detail::require(doc, "images", "");
  if (!images.is_object()) throw ValidationError("/images", "expected an object");
  const std::size_t tokens = b.descriptor.patch_grid_side * b.descriptor.patch_grid_side + 1;
  for (const auto& [id, entry] : images.items()) {
    const std::string at = "/images/" + detail::pointer_escape(id);
    b.attention.emplace(id, detail::parse_attention(detail::require(entry, "attention", at),
                                                    at + "/attention", tokens));
  }

  const auto& rules = detail::as_array(detail::require(doc, "logit_rules", ""), "/logit_rules");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string at = "/logit_rules/" + std::to_string(i);
    LogitRule rule;
    const auto& image_id = detail::require(rules[i], "image_id", at);
    if (!image_id.is_string()) throw ValidationError(at + "/image_id", "expected a string");
    rule.image_id = image_id.get<std::string>();
    const auto& prefix = detail::as_array(detail::require(rules[i], "prefix", at), at + "/prefix");
    for (std::size_t k = 0; k < prefix.size(); ++k) {
      rule.prefix.push_back(static_cast<TokenId>(
          detail::as_uint(prefix[k], at + "/prefix/" + std::to_string(k))));
    }
    rule.logits = detail::real_vector(detail::require(rules[i], "logits", at), at + "/logits",
                                      vocab_size);
    b.logit_rules.push_back(std::move(rule));
  }
  b.fallback_logits =
      detail::real_vector(detail::require(doc, "fallback_logits", ""), "/fallback_logits",
                          vocab_size);
  validate(b);
  return b;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FixtureBundle load_fixture(const std::string& path) {
  return parse_fixture(read_text_file(path));
}

// Serializes with sorted keys; every real is written as a 32-bit float.
inline std::string serialize_fixture(const FixtureBundle& b) {
  using J = detail::FixtureJson;
  auto f32 = [](double v) { return static_cast<float>(v); };
  J doc = J::object();
  const auto& d = b.descriptor;
  doc["descriptor"] = {{"vocab_size", d.vocab_size},
                       {"eos_token", d.eos_token},
                       {"bos_token", d.bos_token},
                       {"patch_grid_side", d.patch_grid_side},
                       {"input_height", d.input_height},
                       {"input_width", d.input_width},
                       {"value_range", {f32(d.value_range.lo), f32(d.value_range.hi)}}};
  doc["vocab"] = b.vocab;
  J images = J::object();
  for (const auto& [id, stack] : b.attention) {
    J layers = J::array();
    for (std::size_t l = 0; l < stack.num_layers(); ++l) {
      J heads = J::array();
      for (std::size_t h = 0; h < stack.num_heads(); ++h) {
        J rows = J::array();
        for (std::size_t r = 0; r < stack.num_tokens(); ++r) {
          J row = J::array();
          for (std::size_t c = 0; c < stack.num_tokens(); ++c) {
            row.push_back(f32(stack.at(l, h, r, c)));
          }
          rows.push_back(std::move(row));
        }
        heads.push_back(std::move(rows));
      }
      layers.push_back(std::move(heads));
    }
    images[id] = {{"attention", std::move(layers)}};
  }
  doc["images"] = std::move(images);
  auto floats = [&](const std::vector<double>& v) {
    J arr = J::array();
    for (double x : v) arr.push_back(f32(x));
    return arr;
  };
  J rules = J::array();
  for (const auto& rule : b.logit_rules) {
    rules.push_back({{"image_id", rule.image_id},
                     {"prefix", rule.prefix},
                     {"logits", floats(rule.logits)}});
  }
  doc["logit_rules"] = std::move(rules);
  doc["fallback_logits"] = floats(b.fallback_logits);
  return doc.dump() + "\n";
}

inline void save_fixture(const FixtureBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << serialize_fixture(b);
  if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Fixture backend

// Attention is keyed by image id, so an amplified image re-encodes to the
// same stack as the original. Immutable after construction; safe to share.
class FixtureBackend final : public ModelBackend {
 public:
  explicit FixtureBackend(FixtureBundle bundle)
      : bundle_(std::make_shared<const FixtureBundle>(std::move(bundle))) {
    validate(*bundle_);
    for (std::size_t i = 0; i < bundle_->logit_rules.size(); ++i) {
      const auto& r = bundle_->logit_rules[i];
      index_.emplace(std::make_pair(r.image_id, r.prefix), i);
    }
  }

  static FixtureBackend from_file(const std::string& path) {
    return FixtureBackend(load_fixture(path));
  }

  const FixtureBundle& bundle() const noexcept { return *bundle_; }
  const BackendDescriptor& descriptor() const override { return bundle_->descriptor; }

  Encoding encode(std::string_view image_id, const ImageTensor& image) const override {
    const auto& d = bundle_->descriptor;
    if (image.height != d.input_height || image.width != d.input_width) {
      throw DimensionError("image is " + std::to_string(image.height) + "x" +
                           std::to_string(image.width) + ", backend expects " +
                           std::to_string(d.input_height) + "x" + std::to_string(d.input_width));
    }
    auto it = bundle_->attention.find(std::string(image_id));
    if (it == bundle_->attention.end()) {
      throw LookupError("fixture has no attention for image id '" + std::string(image_id) + "'");
    }
    return Encoding{it->second, EncoderState{std::string(image_id), nullptr}};
  }

  std::vector<double> step(const EncoderState& state,
                           std::span<const TokenId> prefix) const override {
    const std::vector<TokenId> key(prefix.begin(), prefix.end());
    auto it = index_.find(std::make_pair(state.image_id, key));
    if (it == index_.end()) it = index_.find(std::make_pair(std::string(kAnyImage), key));
    if (it == index_.end()) return bundle_->fallback_logits;
    return bundle_->logit_rules[it->second].logits;
  }

  std::string token_text(TokenId token) const override {
    if (token >= bundle_->vocab.size()) {
      throw IndexError("token id " + std::to_string(token) + " outside vocabulary of size " +
                       std::to_string(bundle_->vocab.size()));
    }
    return bundle_->vocab[token];
  }

 private:
  std::shared_ptr<const FixtureBundle> bundle_;
  std::map<std::pair<std::string, std::vector<TokenId>>, std::size_t> index_;
};

}  // namespace agic
