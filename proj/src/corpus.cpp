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

#include "pairsamp/corpus.hpp"

#include "pairsamp/features.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

namespace pairsamp {

using detail::location;

const Utterance* Corpus::find_utterance(const std::string& file_id) const {
  for (const auto& u : utterances)
    if (u.file_id == file_id) return &u;
  return nullptr;
}

VadMap Corpus::vad_map() const {
  VadMap out;
  for (const auto& u : utterances) out[u.file_id] = u.vad;
  return out;
}

std::map<std::string, std::string> Corpus::speaker_of_file() const {
  std::map<std::string, std::string> out;
  for (const auto& u : utterances) out[u.file_id] = u.speaker_id;
  return out;
}

double Corpus::total_vad_duration() const {
  double total = 0.0;
  for (const auto& u : utterances)
    for (const auto& iv : u.vad) total += iv.duration();
  return total;
}

std::vector<WordTypeStats> compute_type_stats(std::span<const Token> tokens,
                                              std::span<const std::string> labels) {
  std::map<int, long> counts;
  for (const auto& t : tokens) {
    if (t.type_id < 0 || static_cast<std::size_t>(t.type_id) >= labels.size())
      throw InputError("token " + std::to_string(t.token_id) + " has unknown type id " +
                       std::to_string(t.type_id));
    ++counts[t.type_id];
  }
  std::vector<WordTypeStats> stats;
  stats.reserve(counts.size());
  for (const auto& [type_id, count] : counts) {
    WordTypeStats s;
    s.type_id = type_id;
    s.label = labels[type_id];
    s.count = count;
    s.rel_freq = static_cast<double>(count) / static_cast<double>(tokens.size());
    stats.push_back(std::move(s));
  }
  std::vector<std::size_t> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (stats[a].count != stats[b].count) return stats[a].count > stats[b].count;
    return stats[a].label < stats[b].label;
  });
  for (std::size_t r = 0; r < order.size(); ++r) stats[order[r]].rank = static_cast<int>(r) + 1;
  return stats;
}

namespace {

std::string case_fold(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool covered_by(const Interval& span, const std::vector<Interval>& merged) {
  constexpr double kTol = 1e-9;
  for (const auto& iv : merged)
    if (span.onset >= iv.onset - kTol && span.offset <= iv.offset + kTol) return true;
  return false;
}

Interval parse_interval(const std::string& on, const std::string& off, const std::string& where) {
  Interval iv{detail::parse_double(on, where), detail::parse_double(off, where)};
  if (!(iv.offset > iv.onset) || iv.onset < 0.0)
    throw InputError(where + ": interval must satisfy offset > onset >= 0");
  return iv;
}

Corpus filter_by_files(const Corpus& corpus, const std::set<std::string>& files) {
  Corpus out;
  out.labels = corpus.labels;
  for (const auto& u : corpus.utterances)
    if (files.count(u.file_id)) out.utterances.push_back(u);
  for (const auto& t : corpus.tokens)
    if (files.count(t.file_id)) out.tokens.push_back(t);
  if (corpus.phones) {
    PhoneAlignment phones;
    for (const auto& [file, segs] : *corpus.phones)
      if (files.count(file)) phones[file] = segs;
    out.phones = std::move(phones);
  }
  out.type_stats = compute_type_stats(out.tokens, out.labels);
  return out;
}

std::vector<std::size_t> select_utterances(const Corpus& corpus, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InputError("subset fraction must be in (0, 1], got " + detail::format_double(fraction));
  if (corpus.utterances.empty()) throw InputError("subset: corpus has no utterances");
  std::vector<std::size_t> order(corpus.utterances.size());
  std::iota(order.begin(), order.end(), 0);
  if (fraction == 1.0) return order;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const double target = fraction * corpus.total_vad_duration();
  double acc = 0.0;
  std::vector<std::size_t> chosen;
  for (auto i : order) {
    if (acc >= target && !chosen.empty()) break;
    chosen.push_back(i);
    for (const auto& iv : corpus.utterances[i].vad) acc += iv.duration();
  }
  return chosen;
}

}  // namespace

Corpus parse_annotations(const std::filesystem::path& word_file,
                         const std::filesystem::path& vad_file,
                         const std::optional<std::filesystem::path>& phone_file) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> utt_index;

  {
    auto in = detail::open_input(vad_file);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_blank_or_comment(line)) continue;
      const auto where = location(vad_file, line_no);
      const auto f = detail::split_fields(line);
      if (f.size() != 3)
        throw InputError(where + ": expected 'file_id onset offset', got " +
                         std::to_string(f.size()) + " fields");
      const Interval iv = parse_interval(f[1], f[2], where);
      auto [it, inserted] = utt_index.try_emplace(f[0], corpus.utterances.size());
      if (inserted) corpus.utterances.push_back(Utterance{f[0], "", {}});
      auto& vad = corpus.utterances[it->second].vad;
      if (!vad.empty() && iv.onset < vad.back().offset)
        throw InputError(where + ": VAD intervals must be increasing and non-overlapping");
      vad.push_back(iv);
    }
  }

  std::vector<std::vector<Interval>> merged_vad;
  for (const auto& u : corpus.utterances) merged_vad.push_back(merge_intervals(u.vad));

  {
    auto in = detail::open_input(word_file);
    std::unordered_map<std::string, int> type_of_label;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_blank_or_comment(line)) continue;
      const auto where = location(word_file, line_no);
      const auto f = detail::split_fields(line);
      if (f.size() != 5)
        throw InputError(where + ": expected 'file_id speaker_id onset offset word', got " +
                         std::to_string(f.size()) + " fields");
      const auto it = utt_index.find(f[0]);
      if (it == utt_index.end()) throw InputError(where + ": unknown file_id '" + f[0] + "'");
      const Interval iv = parse_interval(f[2], f[3], where);
      if (!covered_by(iv, merged_vad[it->second]))
        throw InputError(where + ": token [" + f[2] + ", " + f[3] + "] lies outside the VAD of " +
                         f[0]);
      auto& utt = corpus.utterances[it->second];
      if (utt.speaker_id.empty())
        utt.speaker_id = f[1];
      else if (utt.speaker_id != f[1])
        throw InputError(where + ": file " + f[0] + " already assigned to speaker " +
                         utt.speaker_id);
      const std::string label = case_fold(f[4]);
      auto [tit, inserted] =
          type_of_label.try_emplace(label, static_cast<int>(corpus.labels.size()));
      if (inserted) corpus.labels.push_back(label);
      Token tok;
      tok.token_id = static_cast<int>(corpus.tokens.size());
      tok.type_id = tit->second;
      tok.speaker_id = f[1];
      tok.file_id = f[0];
      tok.onset = iv.onset;
      tok.offset = iv.offset;
      corpus.tokens.push_back(std::move(tok));
    }
  }

  if (phone_file) {
    auto in = detail::open_input(*phone_file);
    PhoneAlignment phones;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_blank_or_comment(line)) continue;
      const auto where = location(*phone_file, line_no);
      const auto f = detail::split_fields(line);
      if (f.size() != 4)
        throw InputError(where + ": expected 'file_id onset offset phone', got " +
                         std::to_string(f.size()) + " fields");
      if (!utt_index.count(f[0])) throw InputError(where + ": unknown file_id '" + f[0] + "'");
      const Interval iv = parse_interval(f[1], f[2], where);
      auto& segs = phones[f[0]];
      if (!segs.empty() && iv.onset < segs.back().offset - 1e-9)
        throw InputError(where + ": phone segments must be increasing and non-overlapping");
      segs.push_back(PhoneSegment{f[3], iv.onset, iv.offset});
    }
    corpus.phones = std::move(phones);
  }

  corpus.type_stats = compute_type_stats(corpus.tokens, corpus.labels);
  return corpus;
}

VadMap read_vad_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  VadMap vad;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    const auto where = location(path, line_no);
    const auto f = detail::split_fields(line);
    if (f.size() != 3) throw InputError(where + ": expected 'file_id onset offset'");
    auto& ivs = vad[f[0]];
    const Interval iv = parse_interval(f[1], f[2], where);
    if (!ivs.empty() && iv.onset < ivs.back().offset)
      throw InputError(where + ": VAD intervals must be increasing and non-overlapping");
    ivs.push_back(iv);
  }
  return vad;
}

PhoneAlignment read_phone_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  PhoneAlignment phones;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    const auto where = location(path, line_no);
    const auto f = detail::split_fields(line);
    if (f.size() != 4) throw InputError(where + ": expected 'file_id onset offset phone'");
    const Interval iv = parse_interval(f[1], f[2], where);
    auto& segs = phones[f[0]];
    if (!segs.empty() && iv.onset < segs.back().offset - 1e-9)
      throw InputError(where + ": phone segments must be increasing and non-overlapping");
    segs.push_back(PhoneSegment{f[3], iv.onset, iv.offset});
  }
  return phones;
}

void write_annotations(const Corpus& corpus, const std::filesystem::path& dir) {
  using detail::format_double;
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "vad.txt");
    for (const auto& u : corpus.utterances)
      for (const auto& iv : u.vad)
        out << u.file_id << ' ' << format_double(iv.onset) << ' ' << format_double(iv.offset)
            << '\n';
  }
  {
    auto out = detail::open_output(dir / "words.txt");
    for (const auto& t : corpus.tokens)
      out << t.file_id << ' ' << t.speaker_id << ' ' << format_double(t.onset) << ' '
          << format_double(t.offset) << ' ' << corpus.labels.at(t.type_id) << '\n';
  }
  if (corpus.phones) {
    auto out = detail::open_output(dir / "phones.txt");
    for (const auto& u : corpus.utterances) {
      const auto it = corpus.phones->find(u.file_id);
      if (it == corpus.phones->end()) continue;
      for (const auto& p : it->second)
        out << u.file_id << ' ' << format_double(p.onset) << ' ' << format_double(p.offset) << ' '
            << p.phone << '\n';
    }
  }
}

Corpus subset_split(const Corpus& corpus, double fraction, std::uint64_t seed) {
  const auto chosen = select_utterances(corpus, fraction, seed);
  if (fraction == 1.0) return corpus;
  std::set<std::string> files;
  for (auto i : chosen) files.insert(corpus.utterances[i].file_id);
  return filter_by_files(corpus, files);
}

Corpus subset_complement(const Corpus& corpus, double fraction, std::uint64_t seed) {
  const auto chosen = select_utterances(corpus, fraction, seed);
  std::set<std::string> files;
  for (const auto& u : corpus.utterances) files.insert(u.file_id);
  for (auto i : chosen) files.erase(corpus.utterances[i].file_id);
  return filter_by_files(corpus, files);
}

std::pair<Corpus, Corpus> train_validation_split(const Corpus& corpus, double ratio,
                                                 std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw InputError("validation ratio must be in (0, 1), got " + detail::format_double(ratio));
  const std::size_t n = corpus.tokens.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (n_valid == 0 || n_valid >= n)
    throw InputError("train/validation split of " + std::to_string(n) +
                     " tokens leaves one side empty");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_valid(n, false);
  for (std::size_t k = 0; k < n_valid; ++k) is_valid[order[k]] = true;

  Corpus train, valid;
  for (Corpus* side : {&train, &valid}) {
    side->utterances = corpus.utterances;
    side->labels = corpus.labels;
    side->phones = corpus.phones;
  }
  for (std::size_t i = 0; i < n; ++i)
    (is_valid[i] ? valid : train).tokens.push_back(corpus.tokens[i]);
  train.type_stats = compute_type_stats(train.tokens, train.labels);
  valid.type_stats = compute_type_stats(valid.tokens, valid.labels);
  return {std::move(train), std::move(valid)};
}

void validate(const SynthConfig& cfg) {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("synth config: " + what);
  };
  require(cfg.vocab_size >= 1, "vocab_size must be >= 1");
  require(cfg.zipf_alpha > 0.0, "zipf_alpha must be > 0");
  require(cfg.phone_inventory_size >= 1, "phone_inventory_size must be >= 1");
  require(cfg.word_len_range.first >= 1 && cfg.word_len_range.second >= cfg.word_len_range.first,
          "word_len_range must satisfy 1 <= min <= max");
  require(cfg.n_speakers >= 1, "n_speakers must be >= 1");
  require(cfg.tokens_total >= 1, "tokens_total must be >= 1");
  require(cfg.frames_per_phone.first >= 1 &&
              cfg.frames_per_phone.second >= cfg.frames_per_phone.first,
          "frames_per_phone must satisfy 1 <= min <= max");
  require(cfg.feature_dim >= 1, "feature_dim must be >= 1");
  require(cfg.speaker_shift_scale >= 0.0, "speaker_shift_scale must be >= 0");
  require(cfg.noise_scale >= 0.0, "noise_scale must be >= 0");
  require(cfg.tokens_per_utterance >= 1, "tokens_per_utterance must be >= 1");
  require(cfg.frame_period > 0.0, "frame_period must be > 0");
  require(cfg.prototype_scale > 0.0, "prototype_scale must be > 0");
  require(cfg.phone_subspace_dim >= 0 && cfg.phone_subspace_dim <= cfg.feature_dim,
          "phone_subspace_dim must be in [0, feature_dim]");

  double available = 0.0;
  for (int len = cfg.word_len_range.first; len <= cfg.word_len_range.second; ++len)
    available += std::pow(static_cast<double>(cfg.phone_inventory_size), len);
  require(available >= cfg.vocab_size,
          "vocab_size " + std::to_string(cfg.vocab_size) + " exceeds the " +
              std::to_string(static_cast<long long>(available)) +
              " distinct phone sequences available");
}

std::vector<double> zipf_probabilities(int vocab_size, double alpha) {
  std::vector<double> p(vocab_size);
  double total = 0.0;
  for (int r = 0; r < vocab_size; ++r) total += p[r] = std::pow(r + 1.0, -alpha);
  for (auto& v : p) v /= total;
  return p;
}

std::pair<Corpus, FeatureArchive> generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n_phones = cfg.phone_inventory_size;
  const int dim = cfg.feature_dim;

  const auto pad = [](int value, int width) {
    std::ostringstream os;
    os << std::setw(width) << std::setfill('0') << value;
    return os.str();
  };
  const int phone_width = static_cast<int>(std::to_string(n_phones - 1).size());
  std::vector<std::string> phone_names(n_phones);
  for (int p = 0; p < n_phones; ++p) phone_names[p] = "p" + pad(p, phone_width);

  // Vocabulary: distinct phone sequences; type index = Zipf rank - 1.
  std::uniform_int_distribution<int> len_dist(cfg.word_len_range.first, cfg.word_len_range.second);
  std::uniform_int_distribution<int> phone_dist(0, n_phones - 1);
  std::set<std::vector<int>> seen;
  std::vector<std::vector<int>> spelling;
  while (static_cast<int>(spelling.size()) < cfg.vocab_size) {
    std::vector<int> seq(len_dist(rng));
    for (auto& p : seq) p = phone_dist(rng);
    if (seen.insert(seq).second) spelling.push_back(std::move(seq));
  }
  Corpus corpus;
  const int word_width = static_cast<int>(std::to_string(cfg.vocab_size).size());
  for (int w = 0; w < cfg.vocab_size; ++w) corpus.labels.push_back("w" + pad(w + 1, word_width));

  // Phone prototypes in a random subspace; each speaker applies a diagonal
  // scaling and an additive offset.
  const int rank = cfg.phone_subspace_dim > 0 ? cfg.phone_subspace_dim : dim;
  Matrix basis(dim, rank);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = gauss(rng) / std::sqrt(rank);
  Matrix coords(n_phones, rank);
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = gauss(rng);
  const Matrix prototypes = cfg.prototype_scale * coords * basis.transpose();

  std::vector<Matrix> speaker_means(cfg.n_speakers);
  std::vector<std::string> speaker_names(cfg.n_speakers);
  const int spk_width = static_cast<int>(std::to_string(cfg.n_speakers - 1).size());
  for (int s = 0; s < cfg.n_speakers; ++s) {
    speaker_names[s] = "s" + pad(s, spk_width);
    RowVec<double> offset(dim), scale(dim);
    for (int d = 0; d < dim; ++d)
      offset(d) = cfg.speaker_shift_scale * cfg.prototype_scale * gauss(rng);
    for (int d = 0; d < dim; ++d) scale(d) = std::exp(0.25 * cfg.speaker_shift_scale * gauss(rng));
    Matrix means = (prototypes.array().rowwise() * scale.array()).matrix();
    means.rowwise() += offset;
    speaker_means[s] = std::move(means);
  }

  const auto probs = zipf_probabilities(cfg.vocab_size, cfg.zipf_alpha);
  std::discrete_distribution<int> type_dist(probs.begin(), probs.end());
  std::uniform_int_distribution<int> frames_dist(cfg.frames_per_phone.first,
                                                 cfg.frames_per_phone.second);

  FeatureArchive archive;
  archive.kind = FeatureKind::raw;
  archive.frame_period = cfg.frame_period;
  archive.dim = dim;
  PhoneAlignment phones;

  const int n_utts = (cfg.tokens_total + cfg.tokens_per_utterance - 1) / cfg.tokens_per_utterance;
  const int utt_width = static_cast<int>(std::to_string(n_utts - 1).size());
  int remaining = cfg.tokens_total;
  for (int u = 0; u < n_utts; ++u) {
    const int spk = u % cfg.n_speakers;
    const std::string file_id = "u" + pad(u, utt_width);
    const int n_tokens = std::min(remaining, cfg.tokens_per_utterance);
    remaining -= n_tokens;

    std::vector<RowVec<double>> rows;
    auto& segs = phones[file_id];
    for (int k = 0; k < n_tokens; ++k) {
      const int type = type_dist(rng);
      const auto token_start = static_cast<long>(rows.size());
      for (int p : spelling[type]) {
        const int n_frames = frames_dist(rng);
        const auto phone_start = static_cast<long>(rows.size());
        for (int f = 0; f < n_frames; ++f) {
          RowVec<double> row = speaker_means[spk].row(p);
          for (int d = 0; d < dim; ++d) row(d) += cfg.noise_scale * gauss(rng);
          rows.push_back(std::move(row));
        }
        segs.push_back(PhoneSegment{phone_names[p], phone_start * cfg.frame_period,
                                    static_cast<double>(rows.size()) * cfg.frame_period});
      }
      Token tok;
      tok.token_id = static_cast<int>(corpus.tokens.size());
      tok.type_id = type;
      tok.speaker_id = speaker_names[spk];
      tok.file_id = file_id;
      tok.onset = token_start * cfg.frame_period;
      tok.offset = static_cast<double>(rows.size()) * cfg.frame_period;
      corpus.tokens.push_back(std::move(tok));
    }
    FeatureMatrix fm;
    fm.file_id = file_id;
    fm.frame_period = cfg.frame_period;
    fm.data.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) fm.data.row(static_cast<Eigen::Index>(i)) = rows[i];
    corpus.utterances.push_back(Utterance{
        file_id, speaker_names[spk], {Interval{0.0, static_cast<double>(rows.size()) * cfg.frame_period}}});
    archive.add(std::move(fm));
  }
  corpus.phones = std::move(phones);
  corpus.type_stats = compute_type_stats(corpus.tokens, corpus.labels);
  return {std::move(corpus), std::move(archive)};
}

}  // namespace pairsamp
