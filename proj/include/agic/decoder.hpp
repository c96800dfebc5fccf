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

// Hybrid stochastic beam search. Every beam extends itself by one token per
// step, drawn from Top-p(Top-k(softmax(z / T))), using its own rng stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "agic/error.hpp"

namespace agic {

using TokenId = std::uint32_t;

struct DecoderConfig {
  double temperature = 1.0;
  std::size_t top_k = 50;
  double top_p = 0.9;
  std::size_t num_beams = 5;
  std::size_t max_new_tokens = 30;
  bool early_stopping = true;
  double length_penalty_alpha = 0.0;
  std::uint64_t seed = 0;

  // Only one sequence is ever returned.
  static constexpr std::size_t num_return_sequences = 1;
  static constexpr bool do_sample = true;

  bool operator==(const DecoderConfig&) const = default;
};

inline void validate(const DecoderConfig& c) {
  if (!(c.temperature > 0.0) || !std::isfinite(c.temperature)) {
    throw InputError("temperature must be a positive finite number");
  }
  if (c.top_k < 1) throw InputError("top_k must be >= 1");
  if (!(c.top_p > 0.0 && c.top_p <= 1.0)) throw InputError("top_p must lie in (0, 1]");
  if (c.num_beams < 1) throw InputError("num_beams must be >= 1");
  if (c.max_new_tokens < 1) throw InputError("max_new_tokens must be >= 1");
  if (!(c.length_penalty_alpha >= 0.0) || !std::isfinite(c.length_penalty_alpha)) {
    throw InputError("length_penalty_alpha must be finite and non-negative");
  }
}

// probs has one entry per vocabulary token; support lists the tokens that
// survived filtering, in ascending id order. Entries outside it are 0.
struct TokenDistribution {
  std::vector<double> probs;
  std::vector<TokenId> support;

  bool operator==(const TokenDistribution&) const = default;
};

inline TokenDistribution temperature_softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw InputError("logit vector is empty");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InputError("temperature must be a positive finite number");
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      throw InputError("logit " + std::to_string(i) + " is not finite");
    }
    max_logit = std::max(max_logit, logits[i]);
  }
  TokenDistribution dist;
  dist.probs.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    dist.probs[i] = std::exp((logits[i] - max_logit) / temperature);
    total += dist.probs[i];
  }
  for (double& p : dist.probs) p /= total;
  dist.support.resize(logits.size());
  std::iota(dist.support.begin(), dist.support.end(), TokenId{0});
  return dist;
}

namespace detail {

// Support sorted by descending probability, lower id first on ties.
inline std::vector<TokenId> ranked_support(const TokenDistribution& dist) {
  std::vector<TokenId> order = dist.support;
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    return dist.probs[a] > dist.probs[b];
  });
  return order;
}

inline TokenDistribution restrict_to(const TokenDistribution& dist, std::vector<TokenId> keep) {
  std::sort(keep.begin(), keep.end());
  TokenDistribution out;
  out.probs.assign(dist.probs.size(), 0.0);
  double total = 0.0;
  for (TokenId t : keep) total += dist.probs[t];
  for (TokenId t : keep) out.probs[t] = dist.probs[t] / total;
  out.support = std::move(keep);
  return out;
}

}  // namespace detail

inline TokenDistribution filter_top_k(const TokenDistribution& dist, std::size_t k) {
  if (k == 0) throw InputError("top_k must be >= 1");
  if (k >= dist.support.size()) return dist;
  auto order = detail::ranked_support(dist);
  order.resize(k);
  return detail::restrict_to(dist, std::move(order));
}

// Cumulative mass is compared against p with this slack so that a prefix
// whose exact sum equals p is not rejected for rounding.
inline constexpr double kTopPSlack = 1e-12;

inline TokenDistribution filter_top_p(const TokenDistribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InputError("top_p must lie in (0, 1]");
  if (p >= 1.0) return dist;
  auto order = detail::ranked_support(dist);
  double cumulative = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    cumulative += dist.probs[order[keep]];
    ++keep;
    if (cumulative >= p - kTopPSlack) break;
  }
  if (keep == order.size()) return dist;
  order.resize(keep);
  return detail::restrict_to(dist, std::move(order));
}

// The full per-step sampling law: softmax(z / T), then Top-k, then Top-p.
inline TokenDistribution filtered_distribution(std::span<const double> logits,
                                               const DecoderConfig& config) {
  return filter_top_p(filter_top_k(temperature_softmax(logits, config.temperature), config.top_k),
                      config.top_p);
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent, reproducible random stream. Stream i of seed s is seeded with
// splitmix64(s ^ splitmix64(i)); uniforms use the top 53 bits of each draw.
class SamplerRng {
 public:
  explicit SamplerRng(std::uint64_t seed) : engine_(seed) {}

  static SamplerRng stream(std::uint64_t seed, std::uint64_t index) {
    return SamplerRng(splitmix64(seed ^ splitmix64(index)));
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

inline TokenId sample_token(const TokenDistribution& dist, SamplerRng& rng) {
  if (dist.support.empty()) throw std::logic_error("cannot sample from an empty support");
  const double u = rng.uniform();
  double cumulative = 0.0;
  TokenId last_positive = dist.support.front();
  for (TokenId t : dist.support) {
    const double p = dist.probs[t];
    if (p <= 0.0) continue;
    last_positive = t;
    cumulative += p;
    if (u < cumulative) return t;
  }
  // Rounding left the cumulative sum just below u.
  return last_positive;
}

struct Beam {
  std::vector<TokenId> tokens;  // generated tokens, EOS included when emitted
  double log_prob = 0.0;
  bool finished = false;

  bool operator==(const Beam&) const = default;
};

inline double beam_score(const Beam& beam, double length_penalty_alpha) {
  if (length_penalty_alpha == 0.0 || beam.tokens.empty()) return beam.log_prob;
  return beam.log_prob /
         std::pow(static_cast<double>(beam.tokens.size()), length_penalty_alpha);
}

struct DecodeResult {
  Beam best;
  std::size_t best_index = 0;
  std::vector<Beam> beams;
};

struct SpecialTokens {
  TokenId bos = 0;
  TokenId eos = 1;
};

// `step` maps a token prefix (BOS first) to a finite logit vector:
//   std::vector<double> step(std::span<const TokenId> prefix)
// Exceptions from `step` or malformed logits surface as DecodeError.
template <typename StepFn>
DecodeResult decode(StepFn&& step, SpecialTokens special, const DecoderConfig& config) {
  validate(config);
  std::vector<Beam> beams(config.num_beams);
  std::vector<SamplerRng> streams;
  streams.reserve(config.num_beams);
  for (std::size_t b = 0; b < config.num_beams; ++b) {
    streams.push_back(SamplerRng::stream(config.seed, b));
  }

  std::vector<TokenId> prefix;
  for (std::size_t t = 0; t < config.max_new_tokens; ++t) {
    const bool all_done =
        std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; });
    if (all_done && config.early_stopping) break;

    for (std::size_t b = 0; b < beams.size(); ++b) {
      Beam& beam = beams[b];
      if (beam.finished) continue;
      prefix.assign(1, special.bos);
      prefix.insert(prefix.end(), beam.tokens.begin(), beam.tokens.end());

      TokenDistribution dist;
      try {
        const std::vector<double> logits = step(std::span<const TokenId>(prefix));
        dist = filtered_distribution(logits, config);
      } catch (const std::exception& e) {
        throw DecodeError(t, b, e.what());
      }
      const TokenId token = sample_token(dist, streams[b]);
      beam.log_prob += std::min(0.0, std::log(dist.probs[token]));
      beam.tokens.push_back(token);
      if (token == special.eos || beam.tokens.size() >= config.max_new_tokens) {
        beam.finished = true;
      }
    }
  }

  DecodeResult result;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < beams.size(); ++b) {
    const double score = beam_score(beams[b], config.length_penalty_alpha);
    if (b == 0 || score > best_score) {
      best_score = score;
      result.best_index = b;
    }
  }
  result.best = beams[result.best_index];
  result.beams = std::move(beams);
  return result;
}

}  // namespace agic
