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

#include "test_util.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>

using namespace pairsamp;
using testutil::TempDir;
using testutil::write_file;

namespace {

const WordTypeStats& stats_for(const Corpus& c, const std::string& label) {
  for (const auto& s : c.type_stats)
    if (s.label == label) return s;
  FAIL("no type " << label);
  return c.type_stats.front();
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("three-line word file") {
  TempDir dir;
  const auto words = write_file(dir / "w.txt",
                                "f1 spkA 0.0 0.5 the\nf1 spkA 0.6 1.0 cat\nf2 spkB 0.0 0.4 The\n");
  const auto vad = write_file(dir / "v.txt", "f1 0.0 1.0\n# comment\nf2 0.0 0.4\n");
  const auto c = parse_annotations(words, vad);
  CHECK(c.tokens.size() == 3);
  CHECK(c.type_stats.size() == 2);
  CHECK(stats_for(c, "the").count == 2);
  CHECK(stats_for(c, "the").rank == 1);
  CHECK(stats_for(c, "cat").rank == 2);
  CHECK(c.utterances.size() == 2);
  CHECK(c.speaker_of_file().at("f2") == "spkB");
  CHECK_FALSE(c.phones.has_value());
}

TEST_CASE("empty word file gives an empty corpus") {
  TempDir dir;
  const auto c = parse_annotations(write_file(dir / "w.txt", ""), write_file(dir / "v.txt", ""));
  CHECK(c.tokens.empty());
  CHECK(c.type_stats.empty());
}

TEST_CASE("annotation errors carry line numbers") {
  TempDir dir;
  const auto vad = write_file(dir / "v.txt", "f1 0.0 1.0\n");
  const auto parse = [&](const std::string& words) {
    return error_of([&] { parse_annotations(write_file(dir / "w.txt", words), vad); });
  };
  CHECK(parse("f1 s 0.0 0.5 a\nf1 s 0.5 b\n").find("w.txt:2") != std::string::npos);
  CHECK(parse("f9 s 0.0 0.5 a\n").find("unknown file_id") != std::string::npos);
  CHECK(parse("f1 s 0.5 1.5 a\n").find("outside the VAD") != std::string::npos);
  CHECK(parse("f1 s 0.0 0.5 a\nf1 t 0.5 0.9 a\n").find("w.txt:2") != std::string::npos);
  CHECK(parse("f1 s 0.5 0.2 a\n").find("offset > onset") != std::string::npos);

  const auto phone_err = error_of([&] {
    parse_annotations(write_file(dir / "w.txt", "f1 s 0.0 0.5 a\n"), vad,
                      write_file(dir / "p.txt", "f1 0.0 0.2 b\nf2 0.0 0.1 a\n"));
  });
  CHECK(phone_err.find("p.txt:2") != std::string::npos);
  CHECK(phone_err.find("unknown file_id") != std::string::npos);
}

TEST_CASE("compute_type_stats ranks and frequencies") {
  std::vector<std::string> labels{"the", "cat"};
  std::vector<Token> tokens;
  for (int i = 0; i < 10; ++i) tokens.push_back(Token{i, i == 9 ? 1 : 0, "s", "f", 0, 1});
  auto stats = compute_type_stats(tokens, labels);
  CHECK(stats[0].rank == 1);
  CHECK(stats[1].rank == 2);
  CHECK(stats[0].rel_freq == 0.9);
  CHECK(stats[1].rel_freq == 0.1);

  // all singletons: ranks follow label order, frequencies are 1/V
  labels = {"d", "b", "c", "a"};
  tokens.clear();
  for (int i = 0; i < 4; ++i) tokens.push_back(Token{i, i, "s", "f", 0, 1});
  stats = compute_type_stats(tokens, labels);
  CHECK(stats[0].rank == 4);
  CHECK(stats[1].rank == 2);
  CHECK(stats[2].rank == 3);
  CHECK(stats[3].rank == 1);
  for (const auto& s : stats) CHECK(s.rel_freq == 0.25);
}

TEST_CASE("zipf_probabilities") {
  const auto p = zipf_probabilities(3, 1.0);
  CHECK(p[0] == doctest::Approx(6.0 / 11).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(3.0 / 11).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(2.0 / 11).epsilon(1e-15));
}

TEST_CASE("synthetic corpus follows Zipf") {
  SynthConfig cfg;
  cfg.tokens_total = 1000;
  cfg.feature_dim = 4;
  const auto [corpus, archive] = generate_synthetic(cfg, 11);
  // least-squares slope of log count against log rank
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(corpus.type_stats.size());
  for (const auto& s : corpus.type_stats) {
    const double x = std::log(static_cast<double>(s.rank));
    const double y = std::log(static_cast<double>(s.count));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.2));

  long total = 0;
  for (const auto& s : corpus.type_stats) total += s.count;
  CHECK(total == static_cast<long>(corpus.tokens.size()));
}

TEST_CASE("synthetic type counts pass a chi-squared goodness of fit") {
  SynthConfig cfg;
  cfg.tokens_total = 5000;
  cfg.feature_dim = 4;
  const auto [corpus, archive] = generate_synthetic(cfg, 3);
  const auto p = zipf_probabilities(cfg.vocab_size, cfg.zipf_alpha);
  std::vector<long> counts(cfg.vocab_size, 0);
  for (const auto& t : corpus.tokens) ++counts[t.type_id];
  double chi2 = 0.0;
  for (int w = 0; w < cfg.vocab_size; ++w) {
    const double expected = p[w] * cfg.tokens_total;
    chi2 += (counts[w] - expected) * (counts[w] - expected) / expected;
  }
  const boost::math::chi_squared dist(cfg.vocab_size - 1);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
}

TEST_CASE("synthetic corpus structure") {
  SynthConfig cfg;
  cfg.tokens_total = 300;
  cfg.feature_dim = 8;
  const auto [a, fa] = generate_synthetic(cfg, 5);
  const auto [b, fb] = generate_synthetic(cfg, 5);

  SUBCASE("bit-identical under the same seed") {
    REQUIRE(fa.files.size() == fb.files.size());
    for (const auto& [file, fm] : fa.files) CHECK(fm.data == fb.at(file).data);
    REQUIRE(a.tokens.size() == b.tokens.size());
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
      CHECK(a.tokens[i].type_id == b.tokens[i].type_id);
      CHECK(a.tokens[i].onset == b.tokens[i].onset);
    }
  }
  SUBCASE("tokens, phones and frames line up") {
    CHECK(static_cast<int>(a.tokens.size()) == cfg.tokens_total);
    for (const auto& t : a.tokens) {
      const auto& fm = fa.at(t.file_id);
      const auto r = frames_in(t.span(), fm.frame_period, fm.data.rows());
      CHECK(r.size() >= cfg.word_len_range.first * cfg.frames_per_phone.first);
      CHECK(r.size() <= cfg.word_len_range.second * cfg.frames_per_phone.second);
    }
    for (const auto& u : a.utterances) {
      const auto& segs = a.phones->at(u.file_id);
      CHECK(segs.back().offset == doctest::Approx(fa.at(u.file_id).data.rows() * 0.01));
    }
  }
  SUBCASE("counts never increase with rank") {
    auto stats = a.type_stats;
    std::sort(stats.begin(), stats.end(), [](auto& x, auto& y) { return x.rank < y.rank; });
    for (std::size_t i = 1; i < stats.size(); ++i) CHECK(stats[i - 1].count >= stats[i].count);
  }
}

TEST_CASE("zero noise and one speaker give identical per-phone means") {
  SynthConfig cfg;
  cfg.noise_scale = 0.0;
  cfg.n_speakers = 1;
  cfg.tokens_total = 200;
  cfg.feature_dim = 6;
  const auto [corpus, archive] = generate_synthetic(cfg, 9);
  std::map<std::string, RowVec<double>> mean_of;
  for (const auto& [file, segs] : *corpus.phones) {
    const auto& fm = archive.at(file);
    for (const auto& s : segs) {
      const auto r = frames_in({s.onset, s.offset}, fm.frame_period, fm.data.rows());
      REQUIRE(r.size() > 0);
      const RowVec<double> m = fm.data.middleRows(r.begin, r.size()).colwise().mean();
      auto [it, inserted] = mean_of.try_emplace(s.phone, m);
      if (!inserted) CHECK((it->second - m).norm() < 1e-12);
    }
  }
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.phone_inventory_size = 2;
  cfg.word_len_range = {1, 2};
  cfg.vocab_size = 7;  // only 2 + 4 sequences exist
  CHECK(error_of([&] { validate(cfg); }).find("distinct phone sequences") != std::string::npos);
  cfg.vocab_size = 6;
  CHECK_NOTHROW(validate(cfg));
  cfg.zipf_alpha = 0.0;
  CHECK_THROWS_AS(validate(cfg), InputError);
}

TEST_CASE("subset_split") {
  SynthConfig cfg;
  cfg.tokens_total = 1000;  // 100 utterances
  cfg.feature_dim = 4;
  const auto [corpus, archive] = generate_synthetic(cfg, 2);
  REQUIRE(corpus.utterances.size() == 100);

  const auto same = subset_split(corpus, 1.0, 4);
  CHECK(same.utterances.size() == corpus.utterances.size());
  CHECK(same.tokens.size() == corpus.tokens.size());

  const auto half = subset_split(corpus, 0.5, 4);
  double longest = 0.0;
  for (const auto& u : corpus.utterances) longest = std::max(longest, u.vad.front().duration());
  const double target = 0.5 * corpus.total_vad_duration();
  CHECK(half.total_vad_duration() >= target);
  CHECK(half.total_vad_duration() <= target + longest);

  const auto again = subset_split(corpus, 0.5, 4);
  REQUIRE(again.utterances.size() == half.utterances.size());
  for (std::size_t i = 0; i < half.utterances.size(); ++i)
    CHECK(again.utterances[i].file_id == half.utterances[i].file_id);

  const auto rest = subset_complement(corpus, 0.5, 4);
  CHECK(rest.utterances.size() + half.utterances.size() == corpus.utterances.size());
  CHECK(rest.tokens.size() + half.tokens.size() == corpus.tokens.size());
  for (const auto& u : rest.utterances) CHECK(half.find_utterance(u.file_id) == nullptr);
  long total = 0;
  for (const auto& s : half.type_stats) total += s.count;
  CHECK(total == static_cast<long>(half.tokens.size()));
  CHECK_THROWS_AS(subset_split(corpus, 0.0, 1), InputError);
}

TEST_CASE("train_validation_split") {
  SynthConfig cfg;
  cfg.tokens_total = 100;
  cfg.feature_dim = 4;
  const auto [corpus, archive] = generate_synthetic(cfg, 8);
  const auto [train, valid] = train_validation_split(corpus, 0.3, 1);
  CHECK(train.tokens.size() == 70);
  CHECK(valid.tokens.size() == 30);
  std::set<int> ids;
  for (const auto& t : train.tokens) ids.insert(t.token_id);
  for (const auto& t : valid.tokens) CHECK(ids.insert(t.token_id).second);
  CHECK(ids.size() == corpus.tokens.size());

  const auto [train2, valid2] = train_validation_split(corpus, 0.3, 1);
  for (std::size_t i = 0; i < valid.tokens.size(); ++i)
    CHECK(valid.tokens[i].token_id == valid2.tokens[i].token_id);
  long n = 0;
  for (const auto& s : valid.type_stats) n += s.count;
  CHECK(n == 30);
  CHECK_THROWS_AS(train_validation_split(corpus, 1.0, 1), InputError);
}

TEST_CASE("annotations round-trip through write_annotations") {
  SynthConfig cfg;
  cfg.tokens_total = 40;
  cfg.feature_dim = 4;
  const auto [corpus, archive] = generate_synthetic(cfg, 1);
  TempDir dir;
  write_annotations(corpus, dir.path());
  const auto back =
      parse_annotations(dir / "words.txt", dir / "vad.txt", dir / "phones.txt");
  REQUIRE(back.tokens.size() == corpus.tokens.size());
  for (std::size_t i = 0; i < back.tokens.size(); ++i) {
    CHECK(back.tokens[i].onset == corpus.tokens[i].onset);
    CHECK(back.labels[back.tokens[i].type_id] == corpus.labels[corpus.tokens[i].type_id]);
  }
  CHECK(back.phones->size() == corpus.phones->size());
  CHECK(read_vad_file(dir / "vad.txt") == corpus.vad_map());
}
