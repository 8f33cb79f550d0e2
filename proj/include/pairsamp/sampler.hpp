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

#include "pairsamp/corpus.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <map>
#include <vector>

namespace pairsamp {

// Frequency compression applied to type counts before normalization.
enum class PhiKind { raw, sqrt2, cbrt, log1p, one };

std::string_view to_string(PhiKind kind);
PhiKind parse_phi(std::string_view text);
inline constexpr PhiKind kAllPhiKinds[] = {PhiKind::raw, PhiKind::sqrt2, PhiKind::cbrt,
                                           PhiKind::log1p, PhiKind::one};

struct SamplerConfig {
  PhiKind phi = PhiKind::one;
  double p_diff_word = 0.5;     // proportion of pairs with different word types
  double p_diff_speaker = 0.5;  // proportion of pairs with different speakers
  int pairs_per_epoch = 5000;
  bool allow_same_token = false;
  std::uint64_t seed = 0;
};

void validate(const SamplerConfig& cfg);

struct TokenPair {
  Token t1;
  Token t2;
  bool same_word = false;
  bool same_speaker = false;
};

double phi_weight(long n, PhiKind kind);

// P(w) = phi(n_w) / sum_w' phi(n_w'), in the order of stats.
std::vector<double> type_distribution(std::span<const WordTypeStats> stats, PhiKind kind);

// Pair sampler over a fixed corpus. Draws the word category with
// probability p_diff_word and, independently, the speaker category with
// p_diff_speaker; then the types, then tokens uniformly within the
// (type, speaker) cell. After kMaxRetries failed draws the speaker
// constraint is dropped; the word constraint never is.
class PairSampler {
 public:
  static constexpr int kMaxRetries = 100;

  PairSampler(const Corpus& corpus, const SamplerConfig& cfg);

  TokenPair sample(Rng& rng) const;
  std::vector<TokenPair> sample_epoch(std::uint64_t epoch) const;

  const std::vector<double>& probabilities() const { return probs_; }

 private:
  struct TypeCell {
    int type_id = 0;
    std::vector<int> tokens;  // indices into corpus tokens
    std::map<std::string, std::vector<int>> by_speaker;
  };

  std::size_t draw_type(Rng& rng) const;
  std::size_t draw_other_type(Rng& rng, std::size_t excluded) const;
  // Picks a partner of type cell for token t1 under the constraints, or -1.
  int draw_partner(Rng& rng, const TypeCell& cell, int t1, bool same_word,
                   std::optional<bool> diff_speaker) const;

  const Corpus* corpus_;
  SamplerConfig cfg_;
  std::vector<TypeCell> cells_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

TokenPair sample_pair(const Corpus& corpus, const SamplerConfig& cfg, Rng& rng);
std::vector<TokenPair> sample_epoch(const Corpus& corpus, const SamplerConfig& cfg,
                                    std::uint64_t epoch);

}  // namespace pairsamp
