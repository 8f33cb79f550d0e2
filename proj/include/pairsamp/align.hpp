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

#include "pairsamp/features.hpp"
#include "pairsamp/sampler.hpp"
#include "pairsamp/types.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace pairsamp {

enum class FrameDistance { cosine, euclidean };

struct DtwPath {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> steps;
  double total_cost = 0.0;
  // Set when some frame had zero norm under the cosine distance; its
  // distances were taken as 1.
  bool zero_norm = false;

  double normalized_cost() const {
    return steps.empty() ? 0.0 : total_cost / static_cast<double>(steps.size());
  }
};

// Pairwise frame distances, rows of a against rows of b. Under the cosine
// distance 1 - cos(a_i, b_j), a zero-norm row is at distance 1 from all.
template <typename DerivedA, typename DerivedB>
Matrix frame_distances(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                       FrameDistance metric, bool* zero_norm = nullptr) {
  const Matrix ad = a.template cast<double>();
  const Matrix bd = b.template cast<double>();
  Matrix dist(ad.rows(), bd.rows());
  if (metric == FrameDistance::euclidean) {
    for (Eigen::Index i = 0; i < ad.rows(); ++i)
      for (Eigen::Index j = 0; j < bd.rows(); ++j)
        dist(i, j) = (ad.row(i) - bd.row(j)).norm();
    return dist;
  }
  const Vector na = ad.rowwise().norm();
  const Vector nb = bd.rowwise().norm();
  dist.noalias() = ad * bd.transpose();
  bool flagged = false;
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    for (Eigen::Index j = 0; j < dist.cols(); ++j) {
      if (na(i) == 0.0 || nb(j) == 0.0) {
        dist(i, j) = 1.0;
        flagged = true;
      } else {
        dist(i, j) = 1.0 - dist(i, j) / (na(i) * nb(j));
      }
    }
  }
  if (zero_norm != nullptr) *zero_norm = flagged;
  return dist;
}

// Minimal-cost monotone path over a precomputed distance matrix with steps
// (1,0), (0,1), (1,1) and no band. Among equal-cost predecessors the one
// with the shorter path wins, so the result is the same for the transposed
// problem.
DtwPath dtw_from_distances(const Matrix& dist);

template <typename DerivedA, typename DerivedB>
DtwPath dtw(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
            FrameDistance metric = FrameDistance::cosine) {
  if (a.rows() < 1 || b.rows() < 1) throw InputError("dtw: empty sequence");
  bool flagged = false;
  DtwPath path = dtw_from_distances(frame_distances(a, b, metric, &flagged));
  path.zero_norm = flagged;
  return path;
}

struct FramePairBatch {
  Matrix x1;
  Matrix x2;
  Vector y;  // +1 same word, -1 different

  Eigen::Index size() const { return x1.rows(); }
  void append(const FramePairBatch& other);
};

// Frames of a token: rows of the file's matrix whose centers lie inside it.
Matrix token_frames(const Token& token, const FeatureArchive& archive);

// Same-word pairs are DTW-aligned on the raw frames and the path gathers
// stacked rows; different-word pairs are paired from their starts and the
// longer token is trimmed.
FramePairBatch realize_pair(const TokenPair& pair, const FeatureArchive& raw,
                            const FeatureArchive& stacked,
                            FrameDistance metric = FrameDistance::cosine);

FramePairBatch realize_pairs(std::span<const TokenPair> pairs, const FeatureArchive& raw,
                             const FeatureArchive& stacked,
                             FrameDistance metric = FrameDistance::cosine);

}  // namespace pairsamp
