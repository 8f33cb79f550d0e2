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

#include "pairsamp/experiment.hpp"

#include "pairsamp/discovery.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

namespace pairsamp {

std::optional<AbxSummary> RunSummary::find(AbxMode mode) const {
  for (const auto& a : abx)
    if (a.mode == mode) return a;
  return std::nullopt;
}

namespace {

// Stream ids for the corpus seed.
constexpr std::uint64_t kHoldoutStream = 1;
constexpr std::uint64_t kFractionStream = 2;
constexpr std::uint64_t kAbxStream = 3;
constexpr std::uint64_t kCollapseStream = 4;

constexpr int kCollapsePairs = 2000;
constexpr double kCollapseCosine = 0.95;

// Runs f, prefixing any error with the stage name and keeping its category.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InputError& e) {
    throw InputError(std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(name) + ": " + e.what());
  }
}

void require_exists(const std::filesystem::path& p, const char* key) {
  if (!std::filesystem::exists(p))
    throw InputError(std::string(key) + " '" + p.string() + "' does not exist");
}

// A corpus over the VAD and phone files alone, one speaker per file.
Corpus corpus_from_vad(const std::filesystem::path& vad_file,
                       const std::filesystem::path& phone_file) {
  Corpus corpus;
  for (const auto& [file, ivs] : read_vad_file(vad_file))
    corpus.utterances.push_back({file, file, ivs});
  corpus.phones = read_phone_file(phone_file);
  return corpus;
}

FeatureArchive load_raw_archive(const ExperimentConfig& cfg, const Corpus& corpus) {
  FeatureArchive raw;
  if (!cfg.archive_dir.empty()) {
    require_exists(cfg.archive_dir, "corpus.archive");
    raw = read_archive(cfg.archive_dir);
  } else {
    require_exists(cfg.wav_dir, "corpus.wav_dir");
    for (const auto& u : corpus.utterances) {
      const auto wav = read_wav(cfg.wav_dir / (u.file_id + ".wav"));
      if (wav.sample_rate != cfg.fbank.sample_rate)
        throw InputError(u.file_id + ".wav: sample rate " + detail::format_double(wav.sample_rate) +
                         " differs from features.sample_rate");
      raw.add(extract_filterbank(wav.samples, cfg.fbank, u.file_id));
    }
    raw.frame_period = cfg.fbank.hop;
  }
  for (const auto& u : corpus.utterances)
    if (!raw.contains(u.file_id)) throw InputError("feature archive has no entry for " + u.file_id);
  return raw;
}

std::set<std::string> file_set(const Corpus& corpus) {
  std::set<std::string> files;
  for (const auto& u : corpus.utterances) files.insert(u.file_id);
  return files;
}

FeatureArchive restrict_archive(const FeatureArchive& archive, const std::set<std::string>& files) {
  FeatureArchive out;
  out.kind = archive.kind;
  out.frame_period = archive.frame_period;
  out.dim = archive.dim;
  for (const auto& [file, fm] : archive.files)
    if (files.count(file)) out.files.emplace(file, fm);
  return out;
}

double mean_embedding_cosine(const FeatureArchive& embedded, std::uint64_t seed) {
  std::vector<const Matrix*> mats;
  long total = 0;
  for (const auto& [file, fm] : embedded.files)
    if (fm.data.rows() > 0) {
      mats.push_back(&fm.data);
      total += fm.data.rows();
    }
  if (total < 2) return 1.0;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_file(0, mats.size() - 1);
  const auto draw = [&]() -> Eigen::Ref<const RowVec<double>> {
    const Matrix& m = *mats[pick_file(rng)];
    std::uniform_int_distribution<Eigen::Index> pick_row(0, m.rows() - 1);
    return m.row(pick_row(rng));
  };
  double sum = 0.0;
  for (int i = 0; i < kCollapsePairs; ++i) {
    const RowVec<double> a = draw();
    const RowVec<double> b = draw();
    const double denom = a.norm() * b.norm();
    sum += denom > 0.0 ? a.dot(b) / denom : 1.0;
  }
  return sum / kCollapsePairs;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData data;
  if (cfg.source == CorpusSource::synth) {
    auto [corpus, raw] = generate_synthetic(cfg.synth, cfg.corpus_seed);
    data.corpus = std::move(corpus);
    data.raw = std::move(raw);
  } else {
    require_exists(cfg.vad_file, "corpus.vad_file");
    require_exists(cfg.phone_file, "corpus.phone_file");
    if (!cfg.word_file.empty()) {
      require_exists(cfg.word_file, "corpus.word_file");
      data.corpus = parse_annotations(cfg.word_file, cfg.vad_file, cfg.phone_file);
    } else {
      data.corpus = corpus_from_vad(cfg.vad_file, cfg.phone_file);
    }
    data.raw = load_raw_archive(cfg, data.corpus);
  }

  if (cfg.normalize) data.raw = normalize_archive(data.raw, data.corpus.vad_map());
  data.stacked = stack_archive(data.raw, cfg.stack_width);

  Corpus rest;
  if (cfg.abx_holdout > 0.0) {
    const auto seed = derive_seed(cfg.corpus_seed, kHoldoutStream);
    data.eval_corpus = subset_split(data.corpus, cfg.abx_holdout, seed);
    rest = subset_complement(data.corpus, cfg.abx_holdout, seed);
  } else {
    data.eval_corpus = data.corpus;
    rest = data.corpus;
  }

  if (cfg.source == CorpusSource::classes) {
    require_exists(cfg.class_file, "corpus.class_file");
    const auto clusters = parse_class_file(cfg.class_file);
    const auto allowed = file_set(rest);
    DiscoveredClusters kept;
    for (const auto& [id, frags] : clusters.clusters) {
      std::vector<Fragment> in_rest;
      for (const auto& f : frags)
        if (allowed.count(f.file_id)) in_rest.push_back(f);
      if (!in_rest.empty()) kept.clusters.emplace_back(id, std::move(in_rest));
    }
    const auto vad = rest.vad_map();
    rest = clusters_to_corpus(kept, rest.speaker_of_file(), &vad);
  }

  data.train_corpus =
      cfg.fraction < 1.0 ? subset_split(rest, cfg.fraction, derive_seed(cfg.corpus_seed, kFractionStream))
                         : std::move(rest);
  return data;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto data = stage("prepare", [&] { return prepare_data(cfg); });
  if (!data.eval_corpus.phones) throw InputError("prepare: corpus has no phone alignment for ABX");
  if (cfg.net.layer_dims.front() != data.stacked.dim)
    throw InputError("config key 'network.layer_dims': input size " +
                     std::to_string(cfg.net.layer_dims.front()) + " does not match " +
                     std::to_string(data.stacked.dim) + " stacked feature columns");

  RunSummary summary;
  const auto trained = stage("train", [&] {
    const auto [train_part, valid_part] =
        train_validation_split(data.train_corpus, cfg.valid_ratio, cfg.train.seed);
    return train(train_part, valid_part, data.raw, data.stacked, cfg.sampler, cfg.net, cfg.train);
  });
  summary.report = trained.report;
  stage("write model", [&] {
    save_model(trained.params, out_dir / "model.abn3");
    write_train_report(trained.report, out_dir / "train_report.tsv");
  });

  const auto eval_files = file_set(data.eval_corpus);
  const auto baseline = restrict_archive(data.stacked, eval_files);
  const auto embedded = stage("embed", [&] { return embed_archive(trained.params, baseline); });

  stage("eval-abx", [&] {
    for (const auto mode : cfg.abx_modes) {
      const auto task = build_abx_task(*data.eval_corpus.phones, data.eval_corpus, mode,
                                       cfg.abx_max_items,
                                       derive_seed(cfg.corpus_seed, kAbxStream));
      const auto emb = evaluate_abx(task, embedded);
      const auto base = evaluate_abx(task, baseline);
      const std::string name(to_string(mode));
      write_abx_tsv(task, emb, out_dir / ("abx_" + name + ".tsv"));
      write_abx_tsv(task, base, out_dir / ("abx_" + name + "_baseline.tsv"));
      summary.abx.push_back({mode, base.error, emb.error, emb.n_cells});
    }
  });

  summary.embedding_mean_cosine =
      mean_embedding_cosine(embedded, derive_seed(cfg.corpus_seed, kCollapseStream));
  summary.collapsed = summary.embedding_mean_cosine > kCollapseCosine;

  stage("write report", [&] {
    write_summary_tsv(summary, out_dir / "summary.tsv");
    nlohmann::ordered_json manifest;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [key, value] : to_config_map(cfg)) config[key] = value;
    manifest["config"] = std::move(config);
    manifest["seeds"] = {{"corpus", cfg.corpus_seed},
                         {"sampler", cfg.sampler.seed},
                         {"train", cfg.train.seed}};
    manifest["corpus"] = {{"utterances", data.corpus.utterances.size()},
                          {"tokens", data.corpus.tokens.size()},
                          {"train_tokens", data.train_corpus.tokens.size()},
                          {"eval_utterances", data.eval_corpus.utterances.size()}};
    manifest["artifacts"] = nlohmann::ordered_json::array();
    for (const char* a : {"model.abn3", "train_report.tsv", "summary.tsv"})
      manifest["artifacts"].push_back(a);
    for (const auto mode : cfg.abx_modes) {
      const std::string name(to_string(mode));
      manifest["artifacts"].push_back("abx_" + name + ".tsv");
      manifest["artifacts"].push_back("abx_" + name + "_baseline.tsv");
    }
    auto out = detail::open_output(out_dir / "run.json");
    out << manifest.dump(2) << '\n';
  });
  return summary;
}

}  // namespace pairsamp
