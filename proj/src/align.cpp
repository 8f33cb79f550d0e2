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

#include <algorithm>

namespace pairsamp {

DtwPath dtw_from_distances(const Matrix& dist) {
  const Eigen::Index n = dist.rows();
  const Eigen::Index m = dist.cols();
  if (n < 1 || m < 1) throw InputError("dtw: empty sequence");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Matrix cost = Matrix::Constant(n, m, kInf);
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> length(n, m);
  // 0 = diagonal, 1 = from (i-1, j), 2 = from (i, j-1)
  Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> from(n, m);

  cost(0, 0) = dist(0, 0);
  length(0, 0) = 1;
  from(0, 0) = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == 0 && j == 0) continue;
      double best = kInf;
      long best_len = 0;
      signed char best_from = -1;
      const auto consider = [&](Eigen::Index pi, Eigen::Index pj, signed char dir) {
        const double c = cost(pi, pj);
        const long l = length(pi, pj);
        if (c < best || (c == best && l < best_len)) {
          best = c;
          best_len = l;
          best_from = dir;
        }
      };
      if (i > 0 && j > 0) consider(i - 1, j - 1, 0);
      if (i > 0) consider(i - 1, j, 1);
      if (j > 0) consider(i, j - 1, 2);
      cost(i, j) = dist(i, j) + best;
      length(i, j) = best_len + 1;
      from(i, j) = best_from;
    }
  }

  DtwPath path;
  path.total_cost = cost(n - 1, m - 1);
  path.steps.resize(static_cast<std::size_t>(length(n - 1, m - 1)));
  Eigen::Index i = n - 1, j = m - 1;
  for (auto k = path.steps.size(); k-- > 0;) {
    path.steps[k] = {i, j};
    switch (from(i, j)) {
      case 0: --i; --j; break;
      case 1: --i; break;
      case 2: --j; break;
      default: break;
    }
  }
  return path;
}

void FramePairBatch::append(const FramePairBatch& other) {
  if (other.size() == 0) return;
  if (size() == 0) {
    *this = other;
    return;
  }
  const Eigen::Index n = size();
  x1.conservativeResize(n + other.size(), Eigen::NoChange);
  x2.conservativeResize(n + other.size(), Eigen::NoChange);
  y.conservativeResize(n + other.size());
  x1.bottomRows(other.size()) = other.x1;
  x2.bottomRows(other.size()) = other.x2;
  y.tail(other.size()) = other.y;
}

Matrix token_frames(const Token& token, const FeatureArchive& archive) {
  const auto& fm = archive.at(token.file_id);
  const auto r = frames_in(token.span(), fm.frame_period, fm.data.rows());
  return fm.data.middleRows(r.begin, r.size());
}

FramePairBatch realize_pair(const TokenPair& pair, const FeatureArchive& raw,
                            const FeatureArchive& stacked, FrameDistance metric) {
  const Matrix s1 = token_frames(pair.t1, stacked);
  const Matrix s2 = token_frames(pair.t2, stacked);
  if (s1.rows() == 0 || s2.rows() == 0)
    throw InputError("realize_pair: token " +
                     std::to_string(s1.rows() == 0 ? pair.t1.token_id : pair.t2.token_id) +
                     " has no frames");
  FramePairBatch batch;
  if (pair.same_word) {
    const Matrix r1 = token_frames(pair.t1, raw);
    const Matrix r2 = token_frames(pair.t2, raw);
    if (r1.rows() != s1.rows() || r2.rows() != s2.rows())
      throw InputError("realize_pair: raw and stacked archives are not row-aligned");
    const DtwPath path = dtw(r1, r2, metric);
    const auto m = static_cast<Eigen::Index>(path.steps.size());
    batch.x1.resize(m, s1.cols());
    batch.x2.resize(m, s2.cols());
    for (Eigen::Index k = 0; k < m; ++k) {
      batch.x1.row(k) = s1.row(path.steps[k].first);
      batch.x2.row(k) = s2.row(path.steps[k].second);
    }
    batch.y = Vector::Ones(m);
  } else {
    const Eigen::Index m = std::min(s1.rows(), s2.rows());
    batch.x1 = s1.topRows(m);
    batch.x2 = s2.topRows(m);
    batch.y = Vector::Constant(m, -1.0);
  }
  return batch;
}

FramePairBatch realize_pairs(std::span<const TokenPair> pairs, const FeatureArchive& raw,
                             const FeatureArchive& stacked, FrameDistance metric) {
  std::vector<FramePairBatch> parts;
  parts.reserve(pairs.size());
  Eigen::Index total = 0;
  for (const auto& p : pairs) {
    parts.push_back(realize_pair(p, raw, stacked, metric));
    total += parts.back().size();
  }
  FramePairBatch out;
  const Eigen::Index dim = stacked.dim;
  out.x1.resize(total, dim);
  out.x2.resize(total, dim);
  out.y.resize(total);
  Eigen::Index row = 0;
  for (const auto& part : parts) {
    out.x1.middleRows(row, part.size()) = part.x1;
    out.x2.middleRows(row, part.size()) = part.x2;
    out.y.segment(row, part.size()) = part.y;
    row += part.size();
  }
  return out;
}

}  // namespace pairsamp
