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

#include "pairsamp/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pairsamp {

struct FeatureArchive;

struct Utterance {
  std::string file_id;
  std::string speaker_id;
  std::vector<Interval> vad;  // non-overlapping, increasing
};

// One spoken occurrence of a word type.
struct Token {
  int token_id = 0;
  int type_id = 0;
  std::string speaker_id;
  std::string file_id;
  double onset = 0.0;
  double offset = 0.0;

  Interval span() const { return {onset, offset}; }
};

struct WordTypeStats {
  int type_id = 0;
  std::string label;
  long count = 0;         // n_w
  double rel_freq = 0.0;  // f_w
  int rank = 0;           // r_w, 1 = most frequent
};

struct PhoneSegment {
  std::string phone;
  double onset = 0.0;
  double offset = 0.0;
};

// file_id -> time-ordered phone segments
using PhoneAlignment = std::map<std::string, std::vector<PhoneSegment>>;
using VadMap = std::map<std::string, std::vector<Interval>>;

struct Corpus {
  std::vector<Utterance> utterances;
  std::vector<Token> tokens;
  // type_id -> orthographic label. May hold labels of types that have no
  // token in this corpus (after a split); type_stats only lists present ones.
  std::vector<std::string> labels;
  std::vector<WordTypeStats> type_stats;
  std::optional<PhoneAlignment> phones;

  const Utterance* find_utterance(const std::string& file_id) const;
  VadMap vad_map() const;
  std::map<std::string, std::string> speaker_of_file() const;
  double total_vad_duration() const;
};

// Ranks by descending count, ties by ascending label. Only types with at
// least one token appear; the result is sorted by type_id.
std::vector<WordTypeStats> compute_type_stats(std::span<const Token> tokens,
                                              std::span<const std::string> labels);

Corpus parse_annotations(const std::filesystem::path& word_file,
                         const std::filesystem::path& vad_file,
                         const std::optional<std::filesystem::path>& phone_file = std::nullopt);

// Standalone readers for the VAD and phone alignment formats.
VadMap read_vad_file(const std::filesystem::path& path);
PhoneAlignment read_phone_file(const std::filesystem::path& path);

// Writes words.txt, vad.txt and (if present) phones.txt into dir.
void write_annotations(const Corpus& corpus, const std::filesystem::path& dir);

// Whole utterances drawn at random until their VAD time reaches
// fraction of the total.
Corpus subset_split(const Corpus& corpus, double fraction, std::uint64_t seed);

// The utterances not selected by subset_split with the same arguments.
Corpus subset_complement(const Corpus& corpus, double fraction, std::uint64_t seed);

// Token-level split; valid gets round(ratio * n) tokens.
std::pair<Corpus, Corpus> train_validation_split(const Corpus& corpus, double ratio,
                                                 std::uint64_t seed);

struct SynthConfig {
  int vocab_size = 50;
  double zipf_alpha = 1.0;
  int phone_inventory_size = 12;
  std::pair<int, int> word_len_range{3, 5};
  int n_speakers = 4;
  int tokens_total = 4000;
  std::pair<int, int> frames_per_phone{3, 6};
  int feature_dim = 40;
  double speaker_shift_scale = 1.0;
  double noise_scale = 0.5;
  int tokens_per_utterance = 10;
  // Phone prototypes are prototype_scale * Z B' with Z ~ N(0, 1) of shape
  // phones x phone_subspace_dim and B a random feature_dim x phone_subspace_dim
  // basis, so each prototype coordinate has std prototype_scale. 0 = full rank.
  double prototype_scale = 0.25;
  int phone_subspace_dim = 4;
  double frame_period = 0.01;
};

void validate(const SynthConfig& cfg);

// Type probabilities proportional to rank^-alpha.
std::vector<double> zipf_probabilities(int vocab_size, double alpha);

std::pair<Corpus, FeatureArchive> generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace pairsamp
