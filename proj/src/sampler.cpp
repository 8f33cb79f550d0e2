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

#include "pairsamp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pairsamp {

std::string_view to_string(PhiKind kind) {
  switch (kind) {
    case PhiKind::raw: return "raw";
    case PhiKind::sqrt2: return "sqrt2";
    case PhiKind::cbrt: return "cbrt";
    case PhiKind::log1p: return "log1p";
    case PhiKind::one: return "one";
  }
  return "raw";
}

PhiKind parse_phi(std::string_view text) {
  for (auto kind : kAllPhiKinds)
    if (to_string(kind) == text) return kind;
  throw InputError("unknown phi '" + std::string(text) +
                   "' (expected raw, sqrt2, cbrt, log1p or one)");
}

void validate(const SamplerConfig& cfg) {
  if (!(cfg.p_diff_word >= 0.0 && cfg.p_diff_word <= 1.0))
    throw InputError("sampler: p_diff_word must be in [0, 1]");
  if (!(cfg.p_diff_speaker >= 0.0 && cfg.p_diff_speaker <= 1.0))
    throw InputError("sampler: p_diff_speaker must be in [0, 1]");
  if (cfg.pairs_per_epoch < 0) throw InputError("sampler: pairs_per_epoch must be >= 0");
}

double phi_weight(long n, PhiKind kind) {
  if (n < 1) throw InputError("phi_weight: count must be >= 1, got " + std::to_string(n));
  const auto x = static_cast<double>(n);
  switch (kind) {
    case PhiKind::raw: return x;
    case PhiKind::sqrt2: return std::sqrt(x);
    case PhiKind::cbrt: return std::cbrt(x);
    case PhiKind::log1p: return std::log1p(x);
    case PhiKind::one: return 1.0;
  }
  return x;
}

std::vector<double> type_distribution(std::span<const WordTypeStats> stats, PhiKind kind) {
  std::vector<double> p(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) p[i] = phi_weight(stats[i].count, kind);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

PairSampler::PairSampler(const Corpus& corpus, const SamplerConfig& cfg)
    : corpus_(&corpus), cfg_(cfg) {
  validate(cfg);
  std::map<int, std::size_t> cell_of_type;
  for (const auto& s : corpus.type_stats) {
    cell_of_type[s.type_id] = cells_.size();
    cells_.push_back(TypeCell{s.type_id, {}, {}});
  }
  for (std::size_t i = 0; i < corpus.tokens.size(); ++i) {
    const auto& tok = corpus.tokens[i];
    const auto it = cell_of_type.find(tok.type_id);
    if (it == cell_of_type.end())
      throw InputError("sampler: token type " + std::to_string(tok.type_id) +
                       " missing from type statistics");
    auto& cell = cells_[it->second];
    cell.tokens.push_back(static_cast<int>(i));
    cell.by_speaker[tok.speaker_id].push_back(static_cast<int>(i));
  }
  if (cells_.size() < 2) throw InputError("sampler: corpus needs at least 2 word types");
  const bool needs_same = cfg.p_diff_word < 1.0;
  if (needs_same && !cfg.allow_same_token &&
      std::none_of(cells_.begin(), cells_.end(),
                   [](const TypeCell& c) { return c.tokens.size() >= 2; }))
    throw InputError(
        "sampler: no realizable same-word pair (every type has a single token and "
        "allow_same_token is false)");

  probs_ = type_distribution(corpus.type_stats, cfg.phi);
  cumulative_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

std::size_t PairSampler::draw_type(Rng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, cumulative_.back())(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
}

std::size_t PairSampler::draw_other_type(Rng& rng, std::size_t excluded) const {
  // Renormalized draw over all types but the excluded one.
  const double mass = cumulative_.back() - probs_[excluded];
  double u = std::uniform_real_distribution<double>(0.0, mass)(rng);
  const double before = excluded == 0 ? 0.0 : cumulative_[excluded - 1];
  if (u >= before) u += probs_[excluded];
  auto idx = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                                      cumulative_.begin());
  idx = std::min(idx, cumulative_.size() - 1);
  if (idx == excluded) idx = excluded + 1 < cumulative_.size() ? excluded + 1 : excluded - 1;
  return idx;
}

int PairSampler::draw_partner(Rng& rng, const TypeCell& cell, int t1, bool same_word,
                              std::optional<bool> diff_speaker) const {
  const bool exclude_self = same_word && !cfg_.allow_same_token;
  const std::string& spk = corpus_->tokens[t1].speaker_id;

  // Gather the eligible groups without copying token lists.
  std::vector<const std::vector<int>*> groups;
  if (!diff_speaker) {
    groups.push_back(&cell.tokens);
  } else if (!*diff_speaker) {
    const auto it = cell.by_speaker.find(spk);
    if (it != cell.by_speaker.end()) groups.push_back(&it->second);
  } else {
    for (const auto& [s, toks] : cell.by_speaker)
      if (s != spk) groups.push_back(&toks);
  }
  long total = 0;
  bool contains_self = false;
  for (const auto* g : groups) {
    total += static_cast<long>(g->size());
    if (exclude_self && std::find(g->begin(), g->end(), t1) != g->end()) contains_self = true;
  }
  const long eligible = total - (contains_self ? 1 : 0);
  if (eligible <= 0) return -1;
  long k = std::uniform_int_distribution<long>(0, eligible - 1)(rng);
  for (const auto* g : groups) {
    for (int tok : *g) {
      if (contains_self && tok == t1) continue;
      if (k-- == 0) return tok;
    }
  }
  return -1;
}

TokenPair PairSampler::sample(Rng& rng) const {
  const bool diff_word = std::bernoulli_distribution(cfg_.p_diff_word)(rng);
  const bool diff_speaker = std::bernoulli_distribution(cfg_.p_diff_speaker)(rng);

  const auto make_pair = [&](int a, int b) {
    TokenPair p;
    p.t1 = corpus_->tokens[a];
    p.t2 = corpus_->tokens[b];
    p.same_word = p.t1.type_id == p.t2.type_id;
    p.same_speaker = p.t1.speaker_id == p.t2.speaker_id;
    return p;
  };

  // Full constraints first, then with the speaker constraint dropped.
  for (int relaxed = 0; relaxed < 2; ++relaxed) {
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      const std::size_t w1 = draw_type(rng);
      const std::size_t w2 = diff_word ? draw_other_type(rng, w1) : w1;
      const auto& first = cells_[w1].tokens;
      const int t1 = first[std::uniform_int_distribution<std::size_t>(0, first.size() - 1)(rng)];
      const auto constraint = relaxed ? std::nullopt : std::optional<bool>(diff_speaker);
      const int t2 = draw_partner(rng, cells_[w2], t1, !diff_word, constraint);
      if (t2 >= 0) return make_pair(t1, t2);
    }
  }
  throw InputError(std::string("sampler: no realizable ") +
                   (diff_word ? "different-word" : "same-word") + " pair after " +
                   std::to_string(2 * kMaxRetries) + " draws");
}

std::vector<TokenPair> PairSampler::sample_epoch(std::uint64_t epoch) const {
  Rng rng(derive_seed(cfg_.seed, epoch));
  std::vector<TokenPair> pairs;
  pairs.reserve(static_cast<std::size_t>(cfg_.pairs_per_epoch));
  for (int i = 0; i < cfg_.pairs_per_epoch; ++i) pairs.push_back(sample(rng));
  return pairs;
}

TokenPair sample_pair(const Corpus& corpus, const SamplerConfig& cfg, Rng& rng) {
  return PairSampler(corpus, cfg).sample(rng);
}

std::vector<TokenPair> sample_epoch(const Corpus& corpus, const SamplerConfig& cfg,
                                    std::uint64_t epoch) {
  return PairSampler(corpus, cfg).sample_epoch(epoch);
}

}  // namespace pairsamp
