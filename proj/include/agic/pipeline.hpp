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

// End-to-end captioning: extract attention, amplify the image, decode on the
// amplified image, then score corpora and run ablation sweeps over them.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "agic/amplifier.hpp"
#include "agic/attention.hpp"
#include "agic/backend.hpp"
#include "agic/dataset.hpp"
#include "agic/decoder.hpp"
#include "agic/error.hpp"
#include "agic/image_io.hpp"
#include "agic/metrics.hpp"

namespace agic {

struct PipelineConfig {
  LayerStrategy layer_strategy = LayerStrategy::Mean;
  AmplificationConfig amplification;
  DecoderConfig decoder;
  std::string backend_path;
  std::string dataset_path;
  std::string image_dir;
  std::string output_path;
  std::size_t workers = 1;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace detail

// Normalized saliency map for an attention stack at the given resolution.
inline SaliencyMap saliency_from_attention(const AttentionStack& stack, LayerStrategy strategy,
                                           std::size_t height, std::size_t width,
                                           UpsampleMode mode) {
  const AttentionGrid grid = normalize_grid(to_grid(select_layer(stack, strategy)));
  return upsample(grid, height, width, mode);
}

struct AgicResult {
  std::string caption;
  DecodeResult decoded;
};

// encode -> select layer -> CLS row -> grid -> normalize -> upsample ->
// amplify -> encode amplified -> decode -> detokenize.
inline AgicResult run_agic_detailed(std::string_view image_id, const ImageTensor& image,
                                    const ModelBackend& backend, const PipelineConfig& config) {
  const Encoding first = detail::stage("encode", [&] {
    Encoding e = backend.encode(image_id, image);
    validate(e.attention);
    return e;
  });
  const SaliencyMap map = detail::stage("attention", [&] {
    return saliency_from_attention(first.attention, config.layer_strategy, image.height,
                                   image.width, config.amplification.upsample_mode);
  });
  const ImageTensor amplified =
      detail::stage("amplify", [&] { return amplify(image, map, config.amplification.k); });
  const Encoding second =
      detail::stage("encode_amplified", [&] { return backend.encode(image_id, amplified); });
  DecodeResult decoded =
      detail::stage("decode", [&] { return decode(backend, second.state, config.decoder); });
  std::string caption =
      detail::stage("detokenize", [&] { return detokenize(backend, decoded.best.tokens); });
  return AgicResult{std::move(caption), std::move(decoded)};
}

inline std::string run_agic(std::string_view image_id, const ImageTensor& image,
                            const ModelBackend& backend, const PipelineConfig& config) {
  return run_agic_detailed(image_id, image, backend, config).caption;
}

// Caption of the unamplified image under the same decoder settings.
inline std::string run_baseline(std::string_view image_id, const ImageTensor& image,
                                const ModelBackend& backend, const DecoderConfig& decoder) {
  const Encoding e = backend.encode(image_id, image);
  return detokenize(backend, decode(backend, e.state, decoder).best.tokens);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Per-image decoder seed, so captions do not depend on scheduling.
inline std::uint64_t entry_seed(std::uint64_t global_seed, std::string_view image_id) {
  return splitmix64(global_seed ^ fnv1a64(image_id));
}

struct RunRecord {
  std::string image_id;
  std::string caption;
  MetricReport metrics;
  double latency_seconds = 0.0;
};

struct RunFailure {
  std::string image_id;
  std::string stage;
  std::string message;
};

struct TimingSummary {
  double mean_s = 0.0;
  double median_s = 0.0;
};

struct DatasetRun {
  std::vector<RunRecord> records;  // dataset order, successful entries only
  std::vector<RunFailure> failures;
  CorpusReport report;
  TimingSummary timing;
};

inline TimingSummary summarize_latency(const std::vector<RunRecord>& records) {
  TimingSummary t;
  if (records.empty()) return t;
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.latency_seconds);
  double sum = 0.0;
  for (double x : v) sum += x;
  t.mean_s = sum / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  t.median_s = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  return t;
}

// Processes every entry, isolating per-image failures. With workers > 1,
// entries are spread over a thread pool; results keep dataset order.
inline DatasetRun run_dataset(const ModelBackend& backend, const DatasetIndex& index,
                              const PipelineConfig& config) {
  validate(config.decoder);
  const auto& d = backend.descriptor();
  struct Slot {
    std::optional<RunRecord> record;
    std::optional<RunFailure> failure;
  };
  std::vector<Slot> slots(index.entries.size());

  auto process = [&](std::size_t i) {
    const DatasetEntry& entry = index.entries[i];
    Slot& slot = slots[i];
    try {
      const ImageTensor image = detail::stage("load_image", [&] {
        return load_image_tensor(entry.image_path, d);
      });
      PipelineConfig local = config;
      local.decoder.seed = entry_seed(config.decoder.seed, entry.image_id);
      const auto start = std::chrono::steady_clock::now();
      std::string caption = run_agic(entry.image_id, image, backend, local);
      const auto stop = std::chrono::steady_clock::now();
      slot.record = RunRecord{entry.image_id, std::move(caption), {},
                              std::chrono::duration<double>(stop - start).count()};
    } catch (const StageError& e) {
      slot.failure = RunFailure{entry.image_id, e.stage(), e.what()};
    } catch (const std::exception& e) {
      slot.failure = RunFailure{entry.image_id, "unknown", e.what()};
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, config.workers);
  if (workers == 1 || index.entries.size() < 2) {
    for (std::size_t i = 0; i < index.entries.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, index.entries.size()); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < index.entries.size(); i = next++) process(i);
      });
    }
  }

  DatasetRun run;
  for (auto& slot : slots) {
    if (slot.record) run.records.push_back(std::move(*slot.record));
    if (slot.failure) run.failures.push_back(std::move(*slot.failure));
  }
  if (!run.records.empty()) {
    std::vector<Candidate> candidates;
    for (const auto& r : run.records) candidates.push_back({r.image_id, tokenize(r.caption)});
    run.report = evaluate_corpus(candidates, reference_corpus(index));
    for (std::size_t i = 0; i < run.records.size(); ++i) {
      run.records[i].metrics = run.report.per_image[i].metrics;
    }
  }
  run.timing = summarize_latency(run.records);
  return run;
}

// Loads backend and dataset from the paths in `config`.
inline DatasetRun run_dataset(const PipelineConfig& config) {
  const FixtureBackend backend = FixtureBackend::from_file(config.backend_path);
  const DatasetIndex index = load_flickr_captions(config.dataset_path, config.image_dir);
  return run_dataset(backend, index, config);
}

// ---------------------------------------------------------------------------
// Ablation sweeps

enum class SweepKind { LayerStrategies, AmplificationFactors, DecodingModes };

inline std::optional<SweepKind> parse_sweep_kind(std::string_view s) {
  if (s == "layers") return SweepKind::LayerStrategies;
  if (s == "k") return SweepKind::AmplificationFactors;
  if (s == "decoding") return SweepKind::DecodingModes;
  return std::nullopt;
}

inline std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::LayerStrategies: return "layers";
    case SweepKind::AmplificationFactors: return "k";
    case SweepKind::DecodingModes: return "decoding";
  }
  return "?";
}

struct SweepPoint {
  std::string label;
  PipelineConfig config;
};

inline std::string format_k(double k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "k=%g", k);
  return buf;
}

// Each point differs from `base` only in the swept field. Decoding modes:
// greedy base (B=1, top_k=1), +Top-k (B=1, p=1), +Top-p (B=1, k=V),
// +Beam Search (top_k=1 with the configured B), All (the base decoder).
inline std::vector<SweepPoint> sweep_points(const PipelineConfig& base, SweepKind kind,
                                            const std::vector<double>& factors,
                                            std::size_t vocab_size) {
  std::vector<SweepPoint> points;
  switch (kind) {
    case SweepKind::LayerStrategies:
      for (LayerStrategy s : kAllLayerStrategies) {
        PipelineConfig c = base;
        c.layer_strategy = s;
        points.push_back({std::string(to_string(s)), c});
      }
      break;
    case SweepKind::AmplificationFactors:
      for (double k : factors) {
        PipelineConfig c = base;
        c.amplification.k = k;
        points.push_back({format_k(k), c});
      }
      break;
    case SweepKind::DecodingModes: {
      PipelineConfig greedy = base;
      greedy.decoder.num_beams = 1;
      greedy.decoder.top_k = 1;
      PipelineConfig top_k = base;
      top_k.decoder.num_beams = 1;
      top_k.decoder.top_p = 1.0;
      PipelineConfig top_p = base;
      top_p.decoder.num_beams = 1;
      top_p.decoder.top_k = std::max<std::size_t>(1, vocab_size);
      PipelineConfig beam = base;
      beam.decoder.top_k = 1;
      points.push_back({"Base", greedy});
      points.push_back({"+Top-k", top_k});
      points.push_back({"+Top-p", top_p});
      points.push_back({"+Beam Search", beam});
      points.push_back({"All", base});
      break;
    }
  }
  return points;
}

struct AblationRow {
  std::string label;
  DatasetRun run;
};

struct AblationTable {
  SweepKind kind = SweepKind::LayerStrategies;
  std::vector<AblationRow> rows;
};

inline AblationTable run_ablation(const ModelBackend& backend, const DatasetIndex& index,
                                  const PipelineConfig& base, SweepKind kind,
                                  const std::vector<double>& factors =
                                      default_amplification_sweep()) {
  AblationTable table{kind, {}};
  for (auto& point : sweep_points(base, kind, factors, backend.descriptor().vocab_size)) {
    table.rows.push_back({point.label, run_dataset(backend, index, point.config)});
  }
  return table;
}

// BLEU is BLEU-4. SPICE is never computed and printed as n/a.
inline constexpr std::string_view kAblationCsvHeader = "config,BLEU,METEOR,R-L,CIDEr,SPICE";

inline void write_ablation_csv(std::ostream& os, const AblationTable& table) {
  os << kAblationCsvHeader << '\n';
  for (const auto& row : table.rows) {
    const MetricReport& m = row.run.report.corpus;
    os << csv_field(row.label) << ',' << format_fixed6(m.bleu[3]) << ','
       << format_fixed6(m.meteor) << ',' << format_fixed6(m.rouge_l) << ','
       << format_fixed6(m.cider) << ",n/a\n";
  }
}

// Aligned text rendering for terminals.
inline void print_ablation_table(std::ostream& os, const AblationTable& table) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %8s %6s\n", "Config.", "BLEU", "MTR",
                "R-L", "CIDEr", "SPICE");
  os << line;
  for (const auto& row : table.rows) {
    const MetricReport& m = row.run.report.corpus;
    std::snprintf(line, sizeof(line), "%-14s %8.4f %8.4f %8.4f %8.4f %6s\n", row.label.c_str(),
                  m.bleu[3], m.meteor, m.rouge_l, m.cider, "n/a");
    os << line;
  }
}

// ---------------------------------------------------------------------------
// Run outputs

inline nlohmann::json to_json(const PipelineConfig& c) {
  const auto& d = c.decoder;
  return {
      {"layer_strategy", std::string(to_string(c.layer_strategy))},
      {"amplification",
       {{"k", c.amplification.k},
        {"upsample_mode", std::string(to_string(c.amplification.upsample_mode))}}},
      {"decoder",
       {{"temperature", d.temperature},
        {"top_k", d.top_k},
        {"top_p", d.top_p},
        {"num_beams", d.num_beams},
        {"max_new_tokens", d.max_new_tokens},
        {"early_stopping", d.early_stopping},
        {"length_penalty_alpha", d.length_penalty_alpha},
        {"num_return_sequences", DecoderConfig::num_return_sequences},
        {"seed", d.seed}}},
      {"fixture", c.backend_path},
      {"dataset", c.dataset_path},
      {"images", c.image_dir},
  };
}

// Sidecar document: configuration, timing and failures. Only the timing
// object varies between identical runs.
inline nlohmann::json run_sidecar(const PipelineConfig& config, const DatasetRun& run) {
  nlohmann::json per_image = nlohmann::json::object();
  for (const auto& r : run.records) per_image[r.image_id] = r.latency_seconds;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : run.failures) {
    failures.push_back({{"image_id", f.image_id}, {"stage", f.stage}, {"message", f.message}});
  }
  return {
      {"config", to_json(config)},
      {"timing",
       {{"mean_s", run.timing.mean_s},
        {"median_s", run.timing.median_s},
        {"per_image", std::move(per_image)}}},
      {"errors", std::move(failures)},
      {"metrics",
       {{"meteor", "meteor-lite: exact matching only, no stemming or synonyms"},
        {"cider", "CIDEr-D (sigma 6, clipped counts, x10)"},
        {"spice", "not computed"}}},
  };
}

inline void write_captions_csv(std::ostream& os, const DatasetRun& run) {
  os << "image_id,caption\n";
  for (const auto& r : run.records) os << csv_field(r.image_id) << ',' << csv_field(r.caption) << '\n';
}

}  // namespace agic
