// Copyright 2026  The pairsamp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pairsamp/abx.hpp"
#include "pairsamp/align.hpp"
#include "pairsamp/corpus.hpp"
#include "pairsamp/features.hpp"
#include "pairsamp/network.hpp"
#include "pairsamp/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pairsamp {

// Flat "section.key" -> value view of a config file.
using ConfigMap = std::map<std::string, std::string>;

// `key = value` lines under `[section]` headers; lines starting with `#` or
// `;` are comments.
// A .json path is read as a run manifest and its "config" object is used.
ConfigMap read_config(const std::filesystem::path& path);
ConfigMap parse_config_text(const std::string& text);
void write_config(const ConfigMap& config, const std::filesystem::path& path);

enum class CorpusSource { synth, annotations, classes };

struct ExperimentConfig {
  CorpusSource source = CorpusSource::synth;
  std::filesystem::path word_file, vad_file, phone_file, class_file;
  std::filesystem::path archive_dir;  // precomputed raw archive
  std::filesystem::path wav_dir;      // <file_id>.wav, used when no archive
  SynthConfig synth;
  std::uint64_t corpus_seed = 1;  // synthesis, ABX holdout and subset selection
  double fraction = 1.0;

  FbankConfig fbank;
  bool normalize = true;
  int stack_width = 7;

  SamplerConfig sampler;
  NetConfig net;
  TrainConfig train;
  double valid_ratio = 0.3;

  std::vector<AbxMode> abx_modes{AbxMode::within, AbxMode::across};
  double abx_holdout = 0.2;
  int abx_max_items = 0;
  FrameDistance dtw_distance = FrameDistance::cosine;
};

// Validates and fills defaults; errors name the offending key.
ExperimentConfig resolve_config(const ConfigMap& config);
// Every resolved parameter, suitable for write_config.
ConfigMap to_config_map(const ExperimentConfig& cfg);

// Loaded corpus with its raw and stacked archives, before any split.
struct PreparedData {
  Corpus corpus;
  Corpus eval_corpus;  // ABX material
  Corpus train_corpus;
  FeatureArchive raw;
  FeatureArchive stacked;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct AbxSummary {
  AbxMode mode = AbxMode::within;
  double baseline_error = 0.0;
  double embedded_error = 0.0;
  long n_cells = 0;
};

struct RunSummary {
  std::vector<AbxSummary> abx;
  TrainReport report;
  // Mean cosine between embeddings of distinct frames; near 1 means the
  // network mapped everything to one direction.
  double embedding_mean_cosine = 0.0;
  bool collapsed = false;

  std::optional<AbxSummary> find(AbxMode mode) const;
};

// load/synth corpus -> features -> train -> embed -> ABX (embedded and raw
// baseline). Writes model.abn3, train_report.tsv, abx_<mode>.tsv,
// abx_<mode>_baseline.tsv, summary.tsv and run.json under out_dir.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct SweepSpec {
  std::string axis;  // phi | p_diff_speaker | p_diff_word | fraction | dtw_threshold_file
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
};

void validate(const SweepSpec& spec);
// Config key that the sweep axis overrides.
std::string sweep_axis_key(const std::string& axis);

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double within_error = 0.0;
  double across_error = 0.0;
  double baseline_within = 0.0;
  double baseline_across = 0.0;
  bool collapsed = false;
};

// One run per (value, seed) with up to jobs in flight; a failed run is
// recorded in its row and the sweep continues. Writes sweep.tsv and
// sweep.svg under out_dir.
std::vector<SweepRow> run_sweep(const ConfigMap& base, const SweepSpec& spec,
                                const std::filesystem::path& out_dir, int jobs = 1);

void write_sweep_tsv(const std::string& axis, const std::vector<SweepRow>& rows,
                     const std::filesystem::path& path);
std::vector<SweepRow> read_sweep_tsv(const std::filesystem::path& path);

// Static line chart of mean error per value with a min-max band.
std::string sweep_svg(const std::string& axis, const std::vector<SweepRow>& rows);

void write_summary_tsv(const RunSummary& summary, const std::filesystem::path& path);
RunSummary read_summary_tsv(const std::filesystem::path& path);

}  // namespace pairsamp
