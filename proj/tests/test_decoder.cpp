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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "agic/decoder.hpp"
#include "test_util.hpp"

namespace agic {
namespace {

TEST(DecoderConfig, DefaultsMatchPublishedHyperparameters) {
  const DecoderConfig c;
  EXPECT_EQ(c.top_p, 0.9);
  EXPECT_EQ(c.num_beams, 5u);
  EXPECT_EQ(c.max_new_tokens, 30u);
  EXPECT_EQ(c.top_k, 50u);
  EXPECT_TRUE(c.early_stopping);
  EXPECT_EQ(c.temperature, 1.0);
  EXPECT_EQ(DecoderConfig::num_return_sequences, 1u);
  EXPECT_EQ(c.length_penalty_alpha, 0.0);
}

TEST(DecoderConfig, ValidationRejectsOutOfRange) {
  DecoderConfig c;
  c.temperature = 0.0;
  EXPECT_THROW(validate(c), InputError);
  c = {};
  c.top_p = 0.0;
  EXPECT_THROW(validate(c), InputError);
  c = {};
  c.top_p = 1.5;
  EXPECT_THROW(validate(c), InputError);
  c = {};
  c.top_k = 0;
  EXPECT_THROW(validate(c), InputError);
  c = {};
  c.num_beams = 0;
  EXPECT_THROW(validate(c), InputError);
}

TEST(TemperatureSoftmax, Symmetric) {
  const std::vector<double> z{0.0, 0.0};
  const auto d = temperature_softmax(z, 1.0);
  EXPECT_DOUBLE_EQ(d.probs[0], 0.5);
  EXPECT_DOUBLE_EQ(d.probs[1], 0.5);
  EXPECT_EQ(d.support.size(), 2u);
}

TEST(TemperatureSoftmax, ClosedForm) {
  const std::vector<double> z{std::log(3.0), 0.0};
  const auto d = temperature_softmax(z, 1.0);
  EXPECT_NEAR(d.probs[0], 0.75, 1e-15);
  EXPECT_NEAR(d.probs[1], 0.25, 1e-15);
}

TEST(TemperatureSoftmax, MatchesScalarOracle) {
  const std::vector<double> z{2.0, 1.0, 0.0};
  const auto d = temperature_softmax(z, 0.5);
  const double e[] = {std::exp(4.0), std::exp(2.0), std::exp(0.0)};
  const double sum = e[0] + e[1] + e[2];
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(d.probs[i], e[i] / sum, 1e-12);
}

TEST(TemperatureSoftmax, StableForHugeLogits) {
  const std::vector<double> z{1000.0, 999.0};
  const auto d = temperature_softmax(z, 1.0);
  EXPECT_NEAR(d.probs[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(TemperatureSoftmax, NonFiniteLogitsRejected) {
  const std::vector<double> z{0.0, std::nan("")};
  EXPECT_THROW(temperature_softmax(z, 1.0), InputError);
  const std::vector<double> inf{0.0, INFINITY};
  EXPECT_THROW(temperature_softmax(inf, 1.0), InputError);
}

TEST(TemperatureSoftmax, ArgmaxInvariantUnderTemperature) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    const auto z = testing::random_vector(rng, 12, -5.0, 5.0);
    const auto a = temperature_softmax(z, 0.5);
    const auto b = temperature_softmax(z, 2.0);
    EXPECT_EQ(std::max_element(a.probs.begin(), a.probs.end()) - a.probs.begin(),
              std::max_element(b.probs.begin(), b.probs.end()) - b.probs.begin());
  }
}

TokenDistribution dist_of(std::vector<double> p) {
  TokenDistribution d;
  d.probs = std::move(p);
  for (TokenId i = 0; i < d.probs.size(); ++i) d.support.push_back(i);
  return d;
}

TEST(TopK, KeepsAndRenormalizes) {
  const auto d = filter_top_k(dist_of({0.5, 0.3, 0.2}), 2);
  EXPECT_NEAR(d.probs[0], 0.625, 1e-15);
  EXPECT_NEAR(d.probs[1], 0.375, 1e-15);
  EXPECT_EQ(d.probs[2], 0.0);
  EXPECT_EQ(d.support, (std::vector<TokenId>{0, 1}));
}

TEST(TopK, FullVocabularyIsIdentity) {
  const auto in = dist_of({0.5, 0.3, 0.2});
  EXPECT_EQ(filter_top_k(in, 3), in);
  EXPECT_EQ(filter_top_k(in, 100), in);
}

TEST(TopK, TiesBreakToLowerIndex) {
  const auto d = filter_top_k(dist_of({0.4, 0.4, 0.2}), 1);
  EXPECT_EQ(d.probs, (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_EQ(d.support, (std::vector<TokenId>{0}));
  // enumerate the tie in the other position too
  const auto e = filter_top_k(dist_of({0.2, 0.4, 0.4}), 1);
  EXPECT_EQ(e.support, (std::vector<TokenId>{1}));
}

TEST(TopP, NucleusIncludesCrossingToken) {
  const auto d = filter_top_p(dist_of({0.5, 0.3, 0.15, 0.05}), 0.9);
  EXPECT_EQ(d.support, (std::vector<TokenId>{0, 1, 2}));
  EXPECT_NEAR(d.probs[0], 0.5 / 0.95, 1e-12);
  EXPECT_NEAR(d.probs[1], 0.3 / 0.95, 1e-12);
  EXPECT_NEAR(d.probs[2], 0.15 / 0.95, 1e-12);
  EXPECT_EQ(d.probs[3], 0.0);
}

TEST(TopP, OneIsIdentity) {
  const auto in = dist_of({0.5, 0.3, 0.15, 0.05});
  EXPECT_EQ(filter_top_p(in, 1.0), in);
}

TEST(TopP, SingletonSupportUnchanged) {
  const auto in = dist_of({1.0, 0.0, 0.0});
  for (double p : {0.1, 0.5, 0.9, 1.0}) {
    const auto out = filter_top_p(in, p);
    EXPECT_EQ(out.probs, in.probs);
  }
}

TEST(TopP, ExactBoundaryDespiteRounding) {
  // 0.6 + 0.3 rounds to 0.8999999999999999 in binary
  const auto d = filter_top_p(dist_of({0.6, 0.3, 0.1}), 0.9);
  EXPECT_EQ(d.support, (std::vector<TokenId>{0, 1}));
}

TEST(Filters, IdentityPipelineOnRandomDistributions) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    const auto d = testing::random_distribution(rng, 17);
    EXPECT_EQ(filter_top_p(filter_top_k(d, 17), 1.0), d);
  }
}

TEST(Filters, ResultIsNormalizedOverSupport) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 100; ++t) {
    const auto d = filter_top_p(filter_top_k(testing::random_distribution(rng, 20), 1 + t % 20),
                                0.05 + 0.0095 * t);
    double sum = 0.0;
    for (TokenId s : d.support) sum += d.probs[s];
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (TokenId i = 0; i < d.probs.size(); ++i) {
      if (!std::binary_search(d.support.begin(), d.support.end(), i)) {
        EXPECT_EQ(d.probs[i], 0.0);
      }
    }
  }
}

TEST(SampleToken, SingletonAlwaysSelected) {
  SamplerRng rng(5);
  const auto d = filter_top_k(dist_of({0.1, 0.7, 0.2}), 1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_token(d, rng), 1u);
}

TEST(SampleToken, FairCoinConcentration) {
  SamplerRng rng(99);
  const auto d = dist_of({0.5, 0.5});
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += sample_token(d, rng) == 0 ? 1 : 0;
  EXPECT_GE(zeros, 4700);
  EXPECT_LE(zeros, 5300);
}

TEST(SampleToken, SeedDeterminism) {
  const auto d = dist_of({0.2, 0.3, 0.1, 0.4});
  SamplerRng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_token(d, a), sample_token(d, b));
}

TEST(SampleToken, EmptySupportIsLogicError) {
  SamplerRng rng(1);
  EXPECT_THROW(sample_token(TokenDistribution{}, rng), std::logic_error);
}

// Backend whose logits depend only on the last token.
struct MarkovStep {
  std::vector<std::vector<double>> table;  // last token -> logits
  std::vector<double> operator()(std::span<const TokenId> prefix) const {
    return table.at(prefix.back());
  }
};

MarkovStep random_markov(std::mt19937_64& rng, std::size_t v) {
  MarkovStep s;
  for (std::size_t i = 0; i < v; ++i) s.table.push_back(testing::random_vector(rng, v, -3, 3));
  return s;
}

TEST(Decode, TopKOneIsGreedyRollout) {
  std::mt19937_64 rng(24);
  for (int t = 0; t < 20; ++t) {
    const MarkovStep step = random_markov(rng, 8);
    DecoderConfig c;
    c.num_beams = 1;
    c.top_k = 1;
    c.max_new_tokens = 12;
    const auto r = decode(step, SpecialTokens{0, 1}, c);
    std::vector<TokenId> greedy;
    TokenId last = 0;
    while (greedy.size() < 12) {
      const auto& z = step.table[last];
      last = static_cast<TokenId>(std::max_element(z.begin(), z.end()) - z.begin());
      greedy.push_back(last);
      if (last == 1) break;
    }
    EXPECT_EQ(r.best.tokens, greedy);
    EXPECT_EQ(r.best.log_prob, 0.0);
  }
}

TEST(Decode, ForcedEosFinishesInOneStep) {
  const auto step = [](std::span<const TokenId>) { return std::vector<double>{0.0, 10.0, 0.0}; };
  DecoderConfig c;
  c.top_k = 1;
  const auto r = decode(step, SpecialTokens{0, 1}, c);
  ASSERT_EQ(r.beams.size(), 5u);
  for (const auto& b : r.beams) {
    EXPECT_TRUE(b.finished);
    EXPECT_EQ(b.tokens, (std::vector<TokenId>{1}));
  }
  EXPECT_EQ(r.best.tokens.size(), 1u);
}

TEST(Decode, StopsAtMaxNewTokens) {
  const auto step = [](std::span<const TokenId>) { return std::vector<double>{0.0, -5.0, 3.0}; };
  DecoderConfig c;
  c.max_new_tokens = 7;
  c.top_k = 1;
  const auto r = decode(step, SpecialTokens{0, 1}, c);
  for (const auto& b : r.beams) EXPECT_EQ(b.tokens.size(), 7u);
}

// Independent replay of the sampling law and rng consumption order:
// beam b draws from mt19937_64(splitmix64(seed ^ splitmix64(b))), one
// 53-bit uniform per unfinished step, inverse CDF over ascending token ids.
std::vector<std::vector<TokenId>> replay(const MarkovStep& step, const DecoderConfig& c,
                                         TokenId eos) {
  std::vector<std::vector<TokenId>> beams;
  for (std::size_t b = 0; b < c.num_beams; ++b) {
    std::mt19937_64 eng(splitmix64(c.seed ^ splitmix64(b)));
    std::vector<TokenId> toks;
    TokenId last = 0;
    while (toks.size() < c.max_new_tokens) {
      const auto& z = step.table[last];
      const std::size_t v = z.size();
      const double zmax = *std::max_element(z.begin(), z.end());
      std::vector<double> p(v);
      double s = 0;
      for (std::size_t i = 0; i < v; ++i) s += (p[i] = std::exp((z[i] - zmax) / c.temperature));
      for (double& x : p) x /= s;
      std::vector<std::size_t> order(v);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b2) { return p[a] > p[b2]; });
      order.resize(std::min(v, c.top_k));
      double kept = 0;
      for (auto i : order) kept += p[i];
      std::vector<double> q(v, 0.0);
      for (auto i : order) q[i] = p[i] / kept;
      double cum = 0;
      std::size_t n = 0;
      while (n < order.size()) {
        cum += q[order[n++]];
        if (cum >= c.top_p - 1e-12) break;
      }
      std::vector<double> r(v, 0.0);
      if (n < order.size()) {
        double mass = 0;
        for (std::size_t i = 0; i < n; ++i) mass += q[order[i]];
        for (std::size_t i = 0; i < n; ++i) r[order[i]] = q[order[i]] / mass;
      } else {
        r = q;
      }
      const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
      double acc = 0;
      TokenId pick = 0;
      for (std::size_t i = 0; i < v; ++i) {
        if (r[i] <= 0) continue;
        pick = static_cast<TokenId>(i);
        acc += r[i];
        if (u < acc) break;
      }
      toks.push_back(pick);
      last = pick;
      if (pick == eos) break;
    }
    beams.push_back(toks);
  }
  return beams;
}

TEST(Decode, MatchesStepByStepReplay) {
  // four-state chain over tokens {bos=0, eos=1, 2, 3}
  MarkovStep chain;
  chain.table = {{-9, 0.2, 1.5, 1.0}, {-9, 0, 0, 0}, {-9, 1.0, 0.3, 1.4}, {-9, 1.2, 1.1, 0.1}};
  for (std::uint64_t seed : {1ULL, 42ULL, 2024ULL}) {
    DecoderConfig c;
    c.num_beams = 5;
    c.top_k = 3;
    c.top_p = 0.85;
    c.temperature = 0.9;
    c.max_new_tokens = 10;
    c.seed = seed;
    const auto r = decode(chain, SpecialTokens{0, 1}, c);
    const auto expected = replay(chain, c, 1);
    ASSERT_EQ(r.beams.size(), expected.size());
    for (std::size_t b = 0; b < expected.size(); ++b) EXPECT_EQ(r.beams[b].tokens, expected[b]);
  }
}

TEST(Decode, BestBeamMaximizesLengthNormalizedScore) {
  std::mt19937_64 rng(25);
  const MarkovStep step = random_markov(rng, 6);
  for (double alpha : {0.0, 0.7, 1.0}) {
    DecoderConfig c;
    c.length_penalty_alpha = alpha;
    c.top_k = 4;
    c.top_p = 0.95;
    c.max_new_tokens = 8;
    const auto r = decode(step, SpecialTokens{0, 1}, c);
    for (const auto& b : r.beams) {
      EXPECT_LE(beam_score(b, alpha), beam_score(r.best, alpha));
    }
    EXPECT_EQ(r.beams[r.best_index], r.best);
  }
}

TEST(Decode, SampledTokensLieInFilteredSupportAndLogProbDecreases) {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 20; ++t) {
    const MarkovStep base = random_markov(rng, 10);
    DecoderConfig c;
    c.top_k = 1 + t % 6;
    c.top_p = 0.3 + 0.035 * t;
    c.seed = static_cast<std::uint64_t>(t);
    c.max_new_tokens = 15;
    const auto r = decode(base, SpecialTokens{0, 1}, c);
    for (const auto& beam : r.beams) {
      TokenId last = 0;
      double lp = 0.0;
      for (TokenId tok : beam.tokens) {
        const auto d = filtered_distribution(base.table[last], c);
        EXPECT_TRUE(std::binary_search(d.support.begin(), d.support.end(), tok));
        const double next = lp + std::min(0.0, std::log(d.probs[tok]));
        EXPECT_LE(next, lp);
        lp = next;
        last = tok;
      }
      EXPECT_DOUBLE_EQ(beam.log_prob, lp);
      EXPECT_LE(beam.log_prob, 0.0);
    }
  }
}

TEST(Decode, TopKOneIgnoresSeedTemperatureAndTopP) {
  std::mt19937_64 rng(27);
  const MarkovStep step = random_markov(rng, 9);
  DecoderConfig c;
  c.top_k = 1;
  const auto ref = decode(step, SpecialTokens{0, 1}, c);
  for (int i = 0; i < 10; ++i) {
    DecoderConfig v = c;
    v.seed = 1000 + static_cast<std::uint64_t>(i);
    v.temperature = 0.3 + 0.4 * i;
    v.top_p = 0.1 + 0.09 * i;
    const auto r = decode(step, SpecialTokens{0, 1}, v);
    EXPECT_EQ(r.best.tokens, ref.best.tokens);
  }
}

TEST(Decode, DeterministicForFixedSeed) {
  std::mt19937_64 rng(28);
  const MarkovStep step = random_markov(rng, 9);
  DecoderConfig c;
  c.seed = 77;
  const auto a = decode(step, SpecialTokens{0, 1}, c);
  const auto b = decode(step, SpecialTokens{0, 1}, c);
  EXPECT_EQ(a.beams, b.beams);
}

TEST(Decode, BackendFailureCarriesStepAndBeam) {
  const auto step = [](std::span<const TokenId> prefix) -> std::vector<double> {
    if (prefix.size() == 3) throw std::runtime_error("backend exploded");
    return {0.0, -9.0, 1.0};
  };
  DecoderConfig c;
  c.top_k = 1;
  try {
    decode(step, SpecialTokens{0, 1}, c);
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.step(), 2u);
    EXPECT_EQ(e.beam(), 0u);
    EXPECT_NE(std::string(e.what()).find("backend exploded"), std::string::npos);
  }
}

TEST(Decode, NonFiniteLogitsSurfaceAsDecodeError) {
  const auto step = [](std::span<const TokenId>) { return std::vector<double>{0.0, NAN}; };
  EXPECT_THROW(decode(step, SpecialTokens{0, 1}, DecoderConfig{}), DecodeError);
}

}  // namespace
}  // namespace agic
