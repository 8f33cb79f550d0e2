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

#include "pairsamp/align.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace pairsamp;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void check_path_shape(const DtwPath& p, Eigen::Index n, Eigen::Index m) {
  REQUIRE(!p.steps.empty());
  CHECK(p.steps.front() == std::pair<Eigen::Index, Eigen::Index>{0, 0});
  CHECK(p.steps.back() == std::pair<Eigen::Index, Eigen::Index>{n - 1, m - 1});
  for (std::size_t k = 1; k < p.steps.size(); ++k) {
    const auto di = p.steps[k].first - p.steps[k - 1].first;
    const auto dj = p.steps[k].second - p.steps[k - 1].second;
    CHECK(((di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1)));
  }
}

// A one-file archive whose rows are the given frames; tokens index it by
// time.
FeatureArchive archive_of(const Matrix& rows) {
  FeatureArchive a;
  FeatureMatrix fm;
  fm.file_id = "f";
  fm.data = rows;
  a.add(fm);
  return a;
}

Token token_at(int id, int type, Eigen::Index first, Eigen::Index count) {
  Token t;
  t.token_id = id;
  t.type_id = type;
  t.file_id = "f";
  t.speaker_id = "s";
  t.onset = 0.01 * static_cast<double>(first);
  t.offset = 0.01 * static_cast<double>(first + count);
  return t;
}

}  // namespace

TEST_CASE("dtw of identical sequences is the diagonal") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(rng, 7, 4);
  const auto p = dtw(a, a);
  REQUIRE(p.steps.size() == 7);
  for (Eigen::Index k = 0; k < 7; ++k)
    CHECK(p.steps[static_cast<std::size_t>(k)] == std::pair<Eigen::Index, Eigen::Index>{k, k});
  CHECK(std::abs(p.total_cost) < 1e-9);
}

TEST_CASE("dtw with a single row on one side") {
  std::mt19937_64 rng(2);
  const auto p = dtw(random_matrix(rng, 1, 3), random_matrix(rng, 5, 3));
  REQUIRE(p.steps.size() == 5);
  for (Eigen::Index j = 0; j < 5; ++j)
    CHECK(p.steps[static_cast<std::size_t>(j)] == std::pair<Eigen::Index, Eigen::Index>{0, j});
  CHECK_THROWS_AS(dtw(Matrix(0, 3), random_matrix(rng, 2, 3)), InputError);
}

TEST_CASE("dtw matches exhaustive path enumeration") {
  std::mt19937_64 rng(3);
  {
    const Matrix a = random_matrix(rng, 8, 4), b = random_matrix(rng, 11, 4);
    const auto p = dtw(a, b);
    CHECK(std::abs(p.total_cost - oracle::dtw_cost(oracle::cosine_distances(a, b))) <= 1e-9);
    check_path_shape(p, 8, 11);
  }
  std::uniform_int_distribution<int> len(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix a = random_matrix(rng, len(rng), 3), b = random_matrix(rng, len(rng), 3);
    const auto p = dtw(a, b);
    CHECK(std::abs(p.total_cost - oracle::dtw_cost(oracle::cosine_distances(a, b))) <= 1e-9);
    check_path_shape(p, a.rows(), b.rows());
    // the reported cost is the sum along the reported path
    const Matrix d = oracle::cosine_distances(a, b);
    double along = 0;
    for (const auto& [i, j] : p.steps) along += d(i, j);
    CHECK(std::abs(along - p.total_cost) <= 1e-12);
  }
}

TEST_CASE("dtw properties") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = random_matrix(rng, 2 + trial % 7, 5), b = random_matrix(rng, 3 + trial % 5, 5);
    const auto ab = dtw(a, b);
    const auto ba = dtw(b, a);
    CHECK(std::abs(ab.total_cost - ba.total_cost) <= 1e-9);
    CHECK(ab.total_cost >= 0.0);
    // equal cost ties resolve the same way in both directions
    REQUIRE(ab.steps.size() == ba.steps.size());
    for (std::size_t k = 0; k < ab.steps.size(); ++k) {
      CHECK(ab.steps[k].first == ba.steps[k].second);
      CHECK(ab.steps[k].second == ba.steps[k].first);
    }
  }
  // positive rescaling of rows keeps the cost at zero
  const Matrix a = random_matrix(rng, 4, 3);
  Matrix b = a;
  b.row(1) *= 3.0;
  b.row(3) *= 0.25;
  CHECK(std::abs(dtw(a, b).total_cost) < 1e-9);
  // every frame distance lies in [0, 2]
  const auto neg = dtw(a, Matrix(-a));
  CHECK(neg.total_cost <= 2.0 * static_cast<double>(neg.steps.size()));
  CHECK(neg.total_cost > 0.0);
}

TEST_CASE("zero-norm frames are at distance 1 and flagged") {
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 0;
  b << 1, 0, 1, 0;
  const auto p = dtw(a, b);
  CHECK(p.zero_norm);
  CHECK(p.total_cost == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(dtw(b, b).zero_norm);
}

TEST_CASE("euclidean frame distance") {
  Matrix a(2, 1), b(3, 1);
  a << 0, 2;
  b << 0, 1, 2;
  const auto p = dtw(a, b, FrameDistance::euclidean);
  CHECK(p.total_cost == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("realize_pair") {
  std::mt19937_64 rng(5);
  const Matrix raw_rows = random_matrix(rng, 40, 3);
  const Matrix stacked_rows = random_matrix(rng, 40, 6);
  const auto raw = archive_of(raw_rows);
  const auto stacked = archive_of(stacked_rows);

  SUBCASE("identical tokens") {
    TokenPair p{token_at(0, 0, 2, 9), token_at(0, 0, 2, 9), true, true};
    const auto batch = realize_pair(p, raw, stacked);
    CHECK(batch.size() == 9);
    CHECK((batch.y.array() == 1.0).all());
    CHECK(batch.x1 == batch.x2);
    CHECK(batch.x1 == stacked_rows.middleRows(2, 9));
  }
  SUBCASE("different words are trimmed from the start") {
    TokenPair p{token_at(0, 0, 0, 10), token_at(1, 1, 20, 6), false, true};
    const auto batch = realize_pair(p, raw, stacked);
    CHECK(batch.size() == 6);
    CHECK((batch.y.array() == -1.0).all());
    CHECK(batch.x1 == stacked_rows.middleRows(0, 6));
    CHECK(batch.x2 == stacked_rows.middleRows(20, 6));
  }
  SUBCASE("same word of different lengths follows the raw DTW path") {
    TokenPair p{token_at(0, 0, 0, 5), token_at(1, 0, 10, 8), true, true};
    const auto batch = realize_pair(p, raw, stacked);
    CHECK(batch.size() >= 8);
    CHECK(batch.size() <= 12);
    const auto path = dtw(raw_rows.middleRows(0, 5), raw_rows.middleRows(10, 8));
    REQUIRE(path.steps.size() == static_cast<std::size_t>(batch.size()));
    for (std::size_t k = 0; k < path.steps.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      CHECK(batch.x1.row(r) == stacked_rows.row(path.steps[k].first));
      CHECK(batch.x2.row(r) == stacked_rows.row(10 + path.steps[k].second));
    }
  }
  SUBCASE("empty token") {
    TokenPair p{token_at(0, 0, 3, 0), token_at(1, 0, 10, 4), true, true};
    CHECK_THROWS_AS(realize_pair(p, raw, stacked), InputError);
  }
  SUBCASE("realize_pairs concatenates") {
    const std::vector<TokenPair> pairs{{token_at(0, 0, 0, 10), token_at(1, 1, 20, 6), false, true},
                                       {token_at(0, 0, 2, 9), token_at(0, 0, 2, 9), true, true}};
    const auto batch = realize_pairs(pairs, raw, stacked);
    CHECK(batch.size() == 15);
    CHECK(batch.x1.cols() == 6);
    CHECK(batch.y.head(6).sum() == -6.0);
    CHECK(batch.y.tail(9).sum() == 9.0);
  }
}
