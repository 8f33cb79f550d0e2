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

// pairsamp: batch front end for pair sampling, siamese training and evaluation.

#include "pairsamp/abx.hpp"
#include "pairsamp/discovery.hpp"
#include "pairsamp/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iostream>
#include <optional>

using namespace pairsamp;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

ConfigMap load_config(const Globals& g, bool required) {
  if (g.config.empty()) {
    if (required) throw InputError("--config is required");
    return {};
  }
  return read_config(g.config);
}

fs::path out_dir(const Globals& g) {
  if (g.out.empty()) throw InputError("--out is required");
  return g.out;
}

void apply_seed(const Globals& g, ConfigMap& config) {
  if (!g.seed) return;
  config["sampler.seed"] = std::to_string(*g.seed);
  config["train.seed"] = std::to_string(*g.seed);
}

// Settings that only need [synth], [features] or [corpus]: placeholders keep
// the sampler section valid when the config has none.
ExperimentConfig resolve_partial(ConfigMap config) {
  config.try_emplace("sampler.phi", "one");
  config.try_emplace("sampler.p_diff_word", "0.5");
  config.try_emplace("sampler.p_diff_speaker", "0.5");
  return resolve_config(config);
}

void print_abx(const AbxMode mode, const AbxResult& r, const char* label) {
  std::printf("%s %s error %.6f (%ld cells, %ld triples)\n", label,
              std::string(to_string(mode)).c_str(), r.error, r.n_cells, r.n_triples);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pair sampling and siamese embedding experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (INI or run.json)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Override seeds (corpus seed for synth, else sampler and train)");
  app.add_option("--jobs", g.jobs, "Concurrent runs in a sweep")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic Zipfian corpus and raw archive");
  synth->fallthrough();

  auto* extract = app.add_subcommand("extract", "Log mel filterbanks from WAV files");
  extract->fallthrough();
  std::string wav_dir, vad_file;
  extract->add_option("--wav-dir", wav_dir, "Directory of <file_id>.wav")->required();
  extract->add_option("--vad-file", vad_file, "VAD file; enables per-file normalization");

  auto* train_cmd = app.add_subcommand("train", "Train a siamese network from a config");
  train_cmd->fallthrough();

  auto* embed = app.add_subcommand("embed", "Embed a feature archive with a trained model");
  embed->fallthrough();
  std::string model_path, archive_dir;
  embed->add_option("--model", model_path)->required();
  embed->add_option("--archive", archive_dir, "Raw or stacked archive")->required();

  auto* eval_abx = app.add_subcommand("eval-abx", "Within/across speaker ABX error");
  eval_abx->fallthrough();
  std::string abx_archive, phone_file, word_file, abx_vad, modes = "within,across";
  eval_abx->add_option("--archive", abx_archive)->required();
  eval_abx->add_option("--phone-file", phone_file)->required();
  eval_abx->add_option("--word-file", word_file, "Word file giving each file's speaker");
  eval_abx->add_option("--vad-file", abx_vad, "VAD file (needed with --word-file)");
  eval_abx->add_option("--modes", modes, "Comma-separated: within, across");

  auto* eval_std = app.add_subcommand("eval-std", "NED and coverage of a class file");
  eval_std->fallthrough();
  std::string class_file, std_vad, std_phone;
  std::optional<double> dtw_threshold;
  eval_std->add_option("--class-file", class_file)->required();
  eval_std->add_option("--vad-file", std_vad)->required();
  eval_std->add_option("--phone-file", std_phone)->required();
  eval_std->add_option("--dtw-threshold", dtw_threshold, "Recorded in the output table");

  auto* run = app.add_subcommand("run", "Full pipeline: corpus, features, train, embed, ABX");
  run->fallthrough();

  auto* sweep = app.add_subcommand("sweep", "One run per (value, seed) along an axis");
  sweep->fallthrough();
  std::string axis, values, seeds;
  sweep->add_option("--axis", axis);
  sweep->add_option("--values", values, "Comma-separated");
  sweep->add_option("--seeds", seeds, "Comma-separated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      auto config = load_config(g, false);
      if (g.seed) config["corpus.seed"] = std::to_string(*g.seed);
      const auto cfg = resolve_partial(config);
      const auto dir = out_dir(g);
      const auto [corpus, raw] = generate_synthetic(cfg.synth, cfg.corpus_seed);
      write_annotations(corpus, dir);
      write_archive(raw, dir / "archive");
      std::printf("%zu utterances, %zu tokens, %zu types -> %s\n", corpus.utterances.size(),
                  corpus.tokens.size(), corpus.type_stats.size(), dir.c_str());
    } else if (extract->parsed()) {
      const auto cfg = resolve_partial(load_config(g, false));
      const auto dir = out_dir(g);
      FeatureArchive raw;
      raw.frame_period = cfg.fbank.hop;
      std::vector<fs::path> wavs;
      for (const auto& entry : fs::directory_iterator(wav_dir))
        if (entry.path().extension() == ".wav") wavs.push_back(entry.path());
      std::sort(wavs.begin(), wavs.end());
      if (wavs.empty()) throw InputError("no .wav files in " + wav_dir);
      for (const auto& p : wavs) {
        const auto wav = read_wav(p);
        if (wav.sample_rate != cfg.fbank.sample_rate)
          throw InputError(p.string() + ": sample rate does not match features.sample_rate");
        raw.add(extract_filterbank(wav.samples, cfg.fbank, p.stem().string()));
      }
      if (!vad_file.empty()) raw = normalize_archive(raw, read_vad_file(vad_file));
      write_archive(raw, dir);
      std::printf("%zu files -> %s\n", raw.files.size(), dir.c_str());
    } else if (train_cmd->parsed()) {
      auto config = load_config(g, true);
      apply_seed(g, config);
      const auto cfg = resolve_config(config);
      const auto dir = out_dir(g);
      const auto data = prepare_data(cfg);
      const auto [train_part, valid_part] =
          train_validation_split(data.train_corpus, cfg.valid_ratio, cfg.train.seed);
      const auto result =
          train(train_part, valid_part, data.raw, data.stacked, cfg.sampler, cfg.net, cfg.train);
      save_model(result.params, dir / "model.abn3");
      write_train_report(result.report, dir / "train_report.tsv");
      std::printf("best epoch %d, stopped at %d\n", result.report.best_epoch,
                  result.report.stopped_epoch);
    } else if (embed->parsed()) {
      const auto dir = out_dir(g);
      const auto params = load_model(model_path);
      auto archive = read_archive(archive_dir);
      const int in_dim = params.config.layer_dims.front();
      if (archive.kind == FeatureKind::raw && archive.dim != in_dim) {
        if (archive.dim <= 0 || in_dim % archive.dim != 0 || (in_dim / archive.dim) % 2 == 0)
          throw InputError("archive has " + std::to_string(archive.dim) +
                           " columns; cannot stack to the model's input size " +
                           std::to_string(in_dim));
        archive = stack_archive(archive, static_cast<int>(in_dim / archive.dim));
      }
      write_archive(embed_archive(params, archive), dir);
    } else if (eval_abx->parsed()) {
      const auto archive = read_archive(abx_archive);
      Corpus corpus;
      if (!word_file.empty()) {
        if (abx_vad.empty()) throw InputError("--word-file needs --vad-file");
        corpus = parse_annotations(word_file, abx_vad, fs::path(phone_file));
      } else {
        corpus.phones = read_phone_file(phone_file);
        for (const auto& [file, segs] : *corpus.phones) corpus.utterances.push_back({file, file, {}});
      }
      for (const auto& m : split_list(modes)) {
        const auto mode = parse_abx_mode(m);
        const auto task = build_abx_task(*corpus.phones, corpus, mode);
        const auto result = evaluate_abx(task, archive);
        if (!g.out.empty())
          write_abx_tsv(task, result, fs::path(g.out) / ("abx_" + std::string(to_string(mode)) + ".tsv"));
        print_abx(mode, result, "ABX");
      }
    } else if (eval_std->parsed()) {
      auto clusters = parse_class_file(class_file);
      const auto report =
          evaluate_clusters(clusters, read_phone_file(std_phone), read_vad_file(std_vad));
      if (!g.out.empty()) write_std_tsv(report, dtw_threshold, fs::path(g.out) / "std.tsv");
      std::printf("clusters %ld  NED %.6f  coverage %.6f  pairs %ld\n", report.n_clusters,
                  report.ned, report.coverage, report.n_pairs);
    } else if (run->parsed()) {
      auto config = load_config(g, true);
      apply_seed(g, config);
      const auto summary = run_experiment(resolve_config(config), out_dir(g));
      for (const auto& a : summary.abx)
        std::printf("%s: embedded %.6f  baseline %.6f\n", std::string(to_string(a.mode)).c_str(),
                    a.embedded_error, a.baseline_error);
      if (summary.collapsed)
        std::printf("embeddings collapsed (mean cosine %.4f)\n", summary.embedding_mean_cosine);
    } else if (sweep->parsed()) {
      auto config = load_config(g, true);
      SweepSpec spec;
      const auto pick = [&](const std::string& flag, const char* key) {
        if (!flag.empty()) return flag;
        const auto it = config.find(std::string("sweep.") + key);
        if (it == config.end())
          throw InputError(std::string("sweep needs --") + key + " or sweep." + key + " in the config");
        return it->second;
      };
      spec.axis = pick(axis, "axis");
      spec.values = split_list(pick(values, "values"));
      if (g.seed) {
        spec.seeds = {*g.seed};
      } else {
        for (const auto& s : split_list(pick(seeds, "seeds"))) {
          std::uint64_t v = 0;
          const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
          if (ec != std::errc() || ptr != s.data() + s.size())
            throw InputError("bad seed '" + s + "'");
          spec.seeds.push_back(v);
        }
      }
      const auto rows = run_sweep(config, spec, out_dir(g), g.jobs);
      int failed = 0;
      for (const auto& r : rows) {
        std::printf("%s seed %llu: %s  within %.4f  across %.4f\n", r.value.c_str(),
                    static_cast<unsigned long long>(r.seed), r.status.c_str(), r.within_error,
                    r.across_error);
        if (r.status != "ok") ++failed;
      }
      if (failed > 0) std::fprintf(stderr, "%d of %zu runs failed\n", failed, rows.size());
    }
  } catch (const InputError& e) {
    std::fprintf(stderr, "pairsamp: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pairsamp: internal error: %s\n", e.what());
    return 2;
  }
  return 0;
}
