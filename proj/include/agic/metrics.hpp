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

// Caption evaluation: BLEU-1..4, ROUGE-L, exact-match METEOR and CIDEr-D
// against multi-reference sets, plus the CSV report writer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "agic/error.hpp"

namespace agic {

using TokenizedCaption = std::vector<std::string>;

struct ReferenceSet {
  std::string image_id;
  std::vector<TokenizedCaption> references;
};

using ReferenceCorpus = std::map<std::string, ReferenceSet>;

struct Candidate {
  std::string image_id;
  TokenizedCaption caption;
};

struct MetricReport {
  std::array<double, 4> bleu{};  // bleu[n - 1] is BLEU-n
  double rouge_l = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  // SPICE needs an external scene-graph parser and is never computed.
  std::optional<double> spice;
};

namespace detail {

// Decodes one UTF-8 code point at s[i], advancing i. Invalid bytes decode
// as themselves so tokenization never fails.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    char32_t cp = ((b0 & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    char32_t cp = ((b0 & 0x0F) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
                  (static_cast<unsigned char>(s[i + 2]) & 0x3F);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    char32_t cp = ((b0 & 0x07) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
                  ((static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) |
                  (static_cast<unsigned char>(s[i + 3]) & 0x3F);
    i += 4;
    return cp;
  }
  i += 1;
  return b0;
}

inline bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

inline bool is_ascii_punct(char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

inline void push_token(std::string_view raw, TokenizedCaption& out) {
  std::size_t b = 0, e = raw.size();
  while (b < e && is_ascii_punct(raw[b])) ++b;
  while (e > b && is_ascii_punct(raw[e - 1])) --e;
  if (b == e) return;
  std::string tok(raw.substr(b, e - b));
  for (char& c : tok) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  out.push_back(std::move(tok));
}

inline std::string ngram_key(const TokenizedCaption& c, std::size_t start, std::size_t n) {
  std::string key = c[start];
  for (std::size_t k = 1; k < n; ++k) {
    key += ' ';
    key += c[start + k];
  }
  return key;
}

using NgramCounts = std::unordered_map<std::string, std::size_t>;

inline NgramCounts count_ngrams(const TokenizedCaption& c, std::size_t n) {
  NgramCounts counts;
  if (c.size() < n) return counts;
  for (std::size_t i = 0; i + n <= c.size(); ++i) ++counts[ngram_key(c, i, n)];
  return counts;
}

}  // namespace detail

// Lowercases ASCII letters, splits on Unicode whitespace, strips leading and
// trailing ASCII punctuation from each token and drops empty tokens.
inline TokenizedCaption tokenize(std::string_view text) {
  TokenizedCaption out;
  std::size_t i = 0, start = 0;
  while (i < text.size()) {
    const std::size_t at = i;
    const char32_t cp = detail::next_code_point(text, i);
    if (detail::is_unicode_space(cp)) {
      if (at > start) detail::push_token(text.substr(start, at - start), out);
      start = i;
    }
  }
  if (start < text.size()) detail::push_token(text.substr(start), out);
  return out;
}

// ---------------------------------------------------------------------------
// BLEU

// Sufficient statistics for BLEU; sentence stats add up to corpus stats.
struct BleuStats {
  std::array<double, 4> matches{};
  std::array<double, 4> totals{};
  double candidate_length = 0.0;
  double reference_length = 0.0;

  BleuStats& operator+=(const BleuStats& o) {
    for (std::size_t n = 0; n < 4; ++n) {
      matches[n] += o.matches[n];
      totals[n] += o.totals[n];
    }
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    return *this;
  }
};

inline BleuStats bleu_stats(const TokenizedCaption& candidate,
                            const std::vector<TokenizedCaption>& references) {
  BleuStats s;
  s.candidate_length = static_cast<double>(candidate.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = detail::count_ngrams(candidate, n);
    std::unordered_map<std::string, std::size_t> max_ref;
    for (const auto& ref : references) {
      for (const auto& [g, c] : detail::count_ngrams(ref, n)) {
        auto& slot = max_ref[g];
        slot = std::max(slot, c);
      }
    }
    double matched = 0.0, total = 0.0;
    for (const auto& [g, c] : cand) {
      total += static_cast<double>(c);
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += static_cast<double>(std::min(c, it->second));
    }
    s.matches[n - 1] = matched;
    s.totals[n - 1] = total;
  }
  // Closest reference length, ties to the shorter one.
  std::optional<std::size_t> closest;
  for (const auto& ref : references) {
    const auto len = ref.size();
    if (!closest) {
      closest = len;
      continue;
    }
    const auto dist = [&](std::size_t l) {
      return l > candidate.size() ? l - candidate.size() : candidate.size() - l;
    };
    if (dist(len) < dist(*closest) || (dist(len) == dist(*closest) && len < *closest)) {
      closest = len;
    }
  }
  s.reference_length = static_cast<double>(closest.value_or(0));
  return s;
}

// Geometric mean of modified precisions over orders 1..max_n, times the
// brevity penalty. Orders with no candidate n-grams are skipped. The z-th
// order (counting from 1) with candidate n-grams but no matches contributes
// 1 / (2^z * count) instead of 0. No unigram match scores exactly 0.
inline double bleu_from_stats(const BleuStats& s, int max_n) {
  if (max_n < 1 || max_n > 4) throw InputError("BLEU order must be in 1..4");
  if (s.candidate_length <= 0.0 || s.matches[0] <= 0.0) return 0.0;
  double log_precision = 0.0;
  int orders = 0;
  double smoothing = 1.0;
  for (int n = 0; n < max_n; ++n) {
    const double total = s.totals[static_cast<std::size_t>(n)];
    if (total <= 0.0) continue;
    const double matched = s.matches[static_cast<std::size_t>(n)];
    double p;
    if (matched > 0.0) {
      p = matched / total;
    } else {
      smoothing *= 2.0;
      p = 1.0 / (smoothing * total);
    }
    log_precision += std::log(p);
    ++orders;
  }
  const double bp = s.candidate_length < s.reference_length
                        ? std::exp(1.0 - s.reference_length / s.candidate_length)
                        : 1.0;
  return bp * std::exp(log_precision / orders);
}

inline double bleu(const TokenizedCaption& candidate, const ReferenceSet& refs, int max_n) {
  return bleu_from_stats(bleu_stats(candidate, refs.references), max_n);
}

// ---------------------------------------------------------------------------
// ROUGE-L

inline std::size_t lcs_length(const TokenizedCaption& a, const TokenizedCaption& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline constexpr double kRougeBeta = 1.2;

inline double rouge_l(const TokenizedCaption& candidate, const ReferenceSet& refs) {
  constexpr double beta2 = kRougeBeta * kRougeBeta;
  double best = 0.0;
  for (const auto& ref : refs.references) {
    if (candidate.empty() || ref.empty()) continue;
    const auto l = static_cast<double>(lcs_length(candidate, ref));
    if (l == 0.0) continue;
    const double p = l / static_cast<double>(candidate.size());
    const double r = l / static_cast<double>(ref.size());
    best = std::max(best, (1.0 + beta2) * p * r / (r + beta2 * p));
  }
  return best;
}

// ---------------------------------------------------------------------------
// METEOR (exact matching only)

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Exact-match alignment with the most matches and, among those, the fewest
// chunks. A chunk is a maximal run of matches contiguous in both sentences.
// Exhaustive search memoized on (position, previous target, used targets);
// caption-length inputs keep the state space small.
inline Alignment align_exact(const TokenizedCaption& cand, const TokenizedCaption& ref) {
  std::unordered_map<std::string, std::size_t> word_id;
  auto id_of = [&](const std::string& w) {
    return word_id.emplace(w, word_id.size()).first->second;
  };
  std::vector<std::size_t> cw(cand.size()), rw(ref.size());
  for (std::size_t i = 0; i < cand.size(); ++i) cw[i] = id_of(cand[i]);
  for (std::size_t j = 0; j < ref.size(); ++j) rw[j] = id_of(ref[j]);

  const std::size_t words = word_id.size();
  std::vector<std::size_t> in_cand(words, 0), in_ref(words, 0);
  for (auto w : cw) ++in_cand[w];
  for (auto w : rw) ++in_ref[w];
  std::vector<std::size_t> need(words);
  std::size_t m = 0;
  for (std::size_t w = 0; w < words; ++w) {
    need[w] = std::min(in_cand[w], in_ref[w]);
    m += need[w];
  }
  if (m == 0) return {};

  // left[i]: occurrences of cw[i] at positions >= i.
  std::vector<std::size_t> left(cand.size());
  {
    std::vector<std::size_t> seen(words, 0);
    for (std::size_t i = cand.size(); i-- > 0;) left[i] = ++seen[cw[i]];
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const std::size_t mask_words = (ref.size() + 63) / 64;
  std::vector<std::uint64_t> used(mask_words, 0);
  std::map<std::tuple<std::size_t, std::size_t, std::vector<std::uint64_t>>, std::size_t> memo;
  constexpr std::size_t kInfeasible = static_cast<std::size_t>(-1) / 2;

  auto solve = [&](auto& self, std::size_t i, std::size_t prev) -> std::size_t {
    if (i == cand.size()) {
      for (std::size_t w = 0; w < words; ++w) {
        if (need[w] != 0) return kInfeasible;
      }
      return 0;
    }
    auto key = std::make_tuple(i, prev, used);
    if (auto it = memo.find(key); it != memo.end()) return it->second;

    const std::size_t w = cw[i];
    std::size_t best = kInfeasible;
    if (left[i] > need[w]) best = self(self, i + 1, kNone);
    if (need[w] > 0) {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        const std::uint64_t bit = std::uint64_t{1} << (j % 64);
        if (rw[j] != w || (used[j / 64] & bit)) continue;
        used[j / 64] |= bit;
        --need[w];
        const std::size_t rest = self(self, i + 1, j);
        ++need[w];
        used[j / 64] &= ~bit;
        if (rest >= kInfeasible) continue;
        const bool extends = prev != kNone && j == prev + 1;
        best = std::min(best, rest + (extends ? 0 : 1));
      }
    }
    memo.emplace(std::move(key), best);
    return best;
  };
  return Alignment{m, solve(solve, 0, kNone)};
}

inline double meteor_lite_single(const TokenizedCaption& cand, const TokenizedCaption& ref) {
  const Alignment a = align_exact(cand, ref);
  if (a.matches == 0) return 0.0;
  const auto m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return fmean * (1.0 - penalty);
}

inline double meteor_lite(const TokenizedCaption& candidate, const ReferenceSet& refs) {
  double best = 0.0;
  for (const auto& ref : refs.references) {
    best = std::max(best, meteor_lite_single(candidate, ref));
  }
  return best;
}

// ---------------------------------------------------------------------------
// CIDEr-D

inline constexpr double kCiderSigma = 6.0;
inline constexpr double kCiderScale = 10.0;

// Document frequencies are built once from the reference sets of the
// evaluated corpus and are read-only afterwards.
class CiderScorer {
 public:
  // `image_ids` is the evaluated corpus; each must have references.
  CiderScorer(const ReferenceCorpus& refs, const std::vector<std::string>& image_ids)
      : corpus_size_(static_cast<double>(image_ids.size())) {
    for (const auto& id : image_ids) {
      const ReferenceSet& set = find_refs(refs, id);
      for (std::size_t n = 1; n <= 4; ++n) {
        std::unordered_set<std::string> seen;
        for (const auto& ref : set.references) {
          for (const auto& [g, c] : detail::count_ngrams(ref, n)) seen.insert(g);
        }
        for (const auto& g : seen) ++df_[n - 1][g];
      }
    }
  }

  double score(const TokenizedCaption& candidate, const ReferenceSet& refs) const {
    if (refs.references.empty()) return 0.0;
    const auto cand = vectors(candidate);
    double total = 0.0;
    for (const auto& ref : refs.references) {
      const auto rv = vectors(ref);
      const double delta =
          static_cast<double>(candidate.size()) - static_cast<double>(ref.size());
      const double penalty = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
      double per_ref = 0.0;
      for (std::size_t n = 0; n < 4; ++n) {
        double dot = 0.0;
        for (const auto& [g, w] : cand[n].weights) {
          auto it = rv[n].weights.find(g);
          if (it != rv[n].weights.end()) dot += std::min(w, it->second) * it->second;
        }
        double sim = 0.0;
        if (cand[n].norm > 0.0 && rv[n].norm > 0.0) sim = dot / (cand[n].norm * rv[n].norm);
        per_ref += kCiderScale * penalty * sim;
      }
      total += per_ref / 4.0;
    }
    return total / static_cast<double>(refs.references.size());
  }

  double idf(std::size_t n, const std::string& ngram) const {
    const auto& table = df_.at(n - 1);
    auto it = table.find(ngram);
    const double df = it == table.end() ? 0.0 : static_cast<double>(it->second);
    return std::log(corpus_size_ / std::max(1.0, df));
  }

  static const ReferenceSet& find_refs(const ReferenceCorpus& refs, const std::string& id) {
    auto it = refs.find(id);
    if (it == refs.end() || it->second.references.empty()) {
      throw LookupError("no references for image id '" + id + "'");
    }
    return it->second;
  }

 private:
  struct TfIdf {
    std::unordered_map<std::string, double> weights;
    double norm = 0.0;
  };

  std::array<TfIdf, 4> vectors(const TokenizedCaption& c) const {
    std::array<TfIdf, 4> out;
    for (std::size_t n = 1; n <= 4; ++n) {
      auto& v = out[n - 1];
      double sq = 0.0;
      for (const auto& [g, tf] : detail::count_ngrams(c, n)) {
        const double w = static_cast<double>(tf) * idf(n, g);
        v.weights.emplace(g, w);
        sq += w * w;
      }
      v.norm = std::sqrt(sq);
    }
    return out;
  }

  double corpus_size_;
  std::array<std::unordered_map<std::string, std::size_t>, 4> df_;
};

struct CiderResult {
  std::map<std::string, double> per_image;
  double mean = 0.0;
};

// A single-image corpus gives every n-gram zero IDF and therefore 0.
inline CiderResult cider(const std::vector<Candidate>& candidates, const ReferenceCorpus& refs) {
  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const auto& c : candidates) ids.push_back(c.image_id);
  const CiderScorer scorer(refs, ids);
  CiderResult out;
  double sum = 0.0;
  for (const auto& c : candidates) {
    const double s = scorer.score(c.caption, CiderScorer::find_refs(refs, c.image_id));
    out.per_image[c.image_id] = s;
    sum += s;
  }
  if (!candidates.empty()) out.mean = sum / static_cast<double>(candidates.size());
  return out;
}

// ---------------------------------------------------------------------------
// Corpus evaluation

struct ImageReport {
  std::string image_id;
  MetricReport metrics;
};

struct CorpusReport {
  std::vector<ImageReport> per_image;  // candidate order
  MetricReport corpus;
};

// Corpus BLEU pools clipped counts and lengths; ROUGE-L, METEOR and CIDEr are
// per-image means.
inline CorpusReport evaluate_corpus(const std::vector<Candidate>& candidates,
                                    const ReferenceCorpus& refs) {
  if (candidates.empty()) throw InputError("cannot evaluate an empty candidate set");
  {
    std::unordered_set<std::string> ids;
    for (const auto& c : candidates) {
      if (!ids.insert(c.image_id).second) {
        throw InputError("duplicate candidate for image id '" + c.image_id + "'");
      }
      CiderScorer::find_refs(refs, c.image_id);
    }
  }
  const CiderResult cider_scores = cider(candidates, refs);

  CorpusReport report;
  BleuStats pooled;
  double rouge_sum = 0.0, meteor_sum = 0.0;
  for (const auto& c : candidates) {
    const ReferenceSet& set = CiderScorer::find_refs(refs, c.image_id);
    const BleuStats stats = bleu_stats(c.caption, set.references);
    pooled += stats;
    ImageReport row{c.image_id, {}};
    for (int n = 1; n <= 4; ++n) {
      row.metrics.bleu[static_cast<std::size_t>(n - 1)] = bleu_from_stats(stats, n);
    }
    row.metrics.rouge_l = rouge_l(c.caption, set);
    row.metrics.meteor = meteor_lite(c.caption, set);
    row.metrics.cider = cider_scores.per_image.at(c.image_id);
    rouge_sum += row.metrics.rouge_l;
    meteor_sum += row.metrics.meteor;
    report.per_image.push_back(std::move(row));
  }
  const auto count = static_cast<double>(candidates.size());
  for (int n = 1; n <= 4; ++n) {
    report.corpus.bleu[static_cast<std::size_t>(n - 1)] = bleu_from_stats(pooled, n);
  }
  report.corpus.rouge_l = rouge_sum / count;
  report.corpus.meteor = meteor_sum / count;
  report.corpus.cider = cider_scores.mean;
  return report;
}

// ---------------------------------------------------------------------------
// CSV report

inline constexpr std::string_view kMetricsCsvHeader =
    "image_id,bleu1,bleu2,bleu3,bleu4,rouge_l,meteor,cider";
inline constexpr std::string_view kCorpusRowId = "__corpus__";

inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_metrics_row(std::ostream& os, std::string_view id, const MetricReport& m) {
  os << csv_field(id);
  for (double b : m.bleu) os << ',' << format_fixed6(b);
  os << ',' << format_fixed6(m.rouge_l) << ',' << format_fixed6(m.meteor) << ','
     << format_fixed6(m.cider) << '\n';
}

inline void write_metrics_csv(std::ostream& os, const CorpusReport& report) {
  os << kMetricsCsvHeader << '\n';
  for (const auto& row : report.per_image) write_metrics_row(os, row.image_id, row.metrics);
  write_metrics_row(os, kCorpusRowId, report.corpus);
}

}  // namespace agic
