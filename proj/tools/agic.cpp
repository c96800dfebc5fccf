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
// agic: run, ablate and score from the command line.
//
// Exit codes: 0 success, 1 startup error (bad arguments, unreadable files),
// 2 validation error (fixture or configuration rejected).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "agic/agic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStartup = 1;
constexpr int kExitValidation = 2;

struct Options {
  std::string fixture;
  std::string dataset;
  std::string images;
  std::string out;
  std::string layer = "mean";
  std::string upsample = "nearest";
  double k = 1.0;
  agic::DecoderConfig decoder;
  std::size_t workers = 1;
};

void add_run_options(CLI::App& app, Options& o) {
  app.add_option("--fixture", o.fixture, "Fixture bundle (JSON interchange file)")->required();
  app.add_option("--dataset", o.dataset, "Flickr-style caption file")->required();
  app.add_option("--images", o.images, "Directory holding the dataset images")->required();
  app.add_option("--out", o.out, "Output CSV path")->required();
  app.add_option("--layer", o.layer, "Layer strategy: mean|first|mid|last|max");
  app.add_option("--upsample", o.upsample, "Saliency upsampling: nearest|bilinear");
  app.add_option("--k", o.k, "Amplification factor");
  app.add_option("--beams", o.decoder.num_beams, "Number of beams");
  app.add_option("--top-k", o.decoder.top_k, "Top-k cutoff");
  app.add_option("--top-p", o.decoder.top_p, "Nucleus mass");
  app.add_option("--temperature", o.decoder.temperature, "Softmax temperature");
  app.add_option("--max-new-tokens", o.decoder.max_new_tokens, "Generation length limit");
  app.add_option("--length-penalty", o.decoder.length_penalty_alpha,
                 "Best-beam length normalization exponent");
  app.add_option("--seed", o.decoder.seed, "Global random seed");
  app.add_option("--workers", o.workers, "Worker threads for the corpus run");
}

agic::PipelineConfig make_config(const Options& o) {
  agic::PipelineConfig c;
  auto layer = agic::parse_layer_strategy(o.layer);
  if (!layer) throw agic::InputError("unknown layer strategy '" + o.layer + "'");
  auto mode = agic::parse_upsample_mode(o.upsample);
  if (!mode) throw agic::InputError("unknown upsample mode '" + o.upsample + "'");
  c.layer_strategy = *layer;
  c.amplification = {o.k, *mode};
  if (!(o.k >= 0.0)) throw agic::InputError("--k must be non-negative");
  c.decoder = o.decoder;
  agic::validate(c.decoder);
  c.backend_path = o.fixture;
  c.dataset_path = o.dataset;
  c.image_dir = o.images;
  c.output_path = o.out;
  c.workers = o.workers;
  return c;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw agic::IoError("cannot write '" + p.string() + "'");
  return f;
}

std::filesystem::path sibling(const std::string& out, const std::string& ext) {
  return std::filesystem::path(out).replace_extension(ext);
}

void report_failures(const agic::DatasetRun& run) {
  for (const auto& f : run.failures) {
    std::cerr << "warning: skipped " << f.image_id << " (" << f.message << ")\n";
  }
}

int cmd_run(const Options& o) {
  const agic::PipelineConfig config = make_config(o);
  const agic::FixtureBackend backend = agic::FixtureBackend::from_file(config.backend_path);
  const agic::DatasetIndex index =
      agic::load_flickr_captions(config.dataset_path, config.image_dir);
  const agic::DatasetRun run = agic::run_dataset(backend, index, config);
  report_failures(run);
  {
    auto f = open_out(config.output_path);
    agic::write_metrics_csv(f, run.report);
  }
  {
    auto f = open_out(sibling(config.output_path, ".captions.csv"));
    agic::write_captions_csv(f, run);
  }
  {
    auto f = open_out(sibling(config.output_path, ".json"));
    f << agic::run_sidecar(config, run).dump(2) << '\n';
  }
  std::cout << "captioned " << run.records.size() << "/" << index.entries.size()
            << " images; corpus BLEU-4 " << agic::format_fixed6(run.report.corpus.bleu[3])
            << ", CIDEr-D " << agic::format_fixed6(run.report.corpus.cider) << "; mean latency "
            << run.timing.mean_s << " s\n";
  return kExitOk;
}

int cmd_ablate(const Options& o, const std::string& sweep, const std::vector<double>& ks) {
  const agic::PipelineConfig config = make_config(o);
  auto kind = agic::parse_sweep_kind(sweep);
  if (!kind) throw agic::InputError("unknown sweep '" + sweep + "' (layers|k|decoding)");
  for (double k : ks) {
    if (!(k >= 0.0)) throw agic::InputError("amplification factors must be non-negative");
  }
  const agic::FixtureBackend backend = agic::FixtureBackend::from_file(config.backend_path);
  const agic::DatasetIndex index =
      agic::load_flickr_captions(config.dataset_path, config.image_dir);
  const agic::AblationTable table = agic::run_ablation(backend, index, config, *kind, ks);
  {
    auto f = open_out(config.output_path);
    agic::write_ablation_csv(f, table);
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json side = agic::run_sidecar(config, row.run);
    side.erase("config");
    side["label"] = row.label;
    rows.push_back(std::move(side));
  }
  {
    auto f = open_out(sibling(config.output_path, ".json"));
    f << nlohmann::json{{"sweep", std::string(agic::to_string(*kind))},
                        {"config", agic::to_json(config)},
                        {"points", std::move(rows)}}
             .dump(2)
      << '\n';
  }
  agic::print_ablation_table(std::cout, table);
  return kExitOk;
}

// Candidates CSV: header "image_id,caption", RFC 4180 quoting.
std::vector<agic::Candidate> read_candidates(const std::string& path) {
  const std::string text = agic::read_text_file(path);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "image_id" ||
      rows[0][1] != "caption") {
    throw agic::ValidationError(path, "candidates CSV must start with header image_id,caption");
  }
  std::vector<agic::Candidate> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != 2) {
      throw agic::ValidationError(path + ":" + std::to_string(r + 1), "expected 2 fields");
    }
    out.push_back({rows[r][0], agic::tokenize(rows[r][1])});
  }
  return out;
}

int cmd_score(const std::string& candidates_path, const std::string& dataset,
              const std::string& out) {
  const auto candidates = read_candidates(candidates_path);
  const agic::DatasetIndex index = agic::load_flickr_captions(dataset, ".");
  const agic::CorpusReport report =
      agic::evaluate_corpus(candidates, agic::reference_corpus(index));
  if (out.empty()) {
    agic::write_metrics_csv(std::cout, report);
  } else {
    auto f = open_out(out);
    agic::write_metrics_csv(f, report);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-guided image captioning: run, ablate and score"};
  app.require_subcommand(1);

  Options run_opts;
  auto* run = app.add_subcommand("run", "Caption a dataset and score it");
  add_run_options(*run, run_opts);

  Options ablate_opts;
  std::string sweep;
  std::vector<double> ks = agic::default_amplification_sweep();
  auto* ablate = app.add_subcommand("ablate", "Sweep one setting and tabulate corpus scores");
  add_run_options(*ablate, ablate_opts);
  ablate->add_option("--sweep", sweep, "layers|k|decoding")->required();
  ablate->add_option("--ks", ks, "Amplification factors for --sweep k")->delimiter(',');

  std::string candidates, score_dataset, score_out;
  auto* score = app.add_subcommand("score", "Score an existing candidates CSV");
  score->add_option("--candidates", candidates, "CSV with header image_id,caption")->required();
  score->add_option("--dataset", score_dataset, "Flickr-style caption file")->required();
  score->add_option("--out", score_out, "Output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitStartup;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*ablate) return cmd_ablate(ablate_opts, sweep, ks);
    if (*score) return cmd_score(candidates, score_dataset, score_out);
  } catch (const agic::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const agic::InputError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStartup;
  }
  return kExitStartup;
}
