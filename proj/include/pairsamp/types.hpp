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

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairsamp {

// Row-major so that one frame (or one embedding) is one contiguous row.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = RowMatrix<double>;
using Rng = std::mt19937_64;
using Vector = Eigen::VectorXd;

// Bad user input: malformed files, invalid configuration, unsatisfiable
// requests. The CLI maps it to exit status 1; everything else is 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Half-open time interval in seconds.
struct Interval {
  double onset = 0.0;
  double offset = 0.0;

  double duration() const { return offset - onset; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Sorts and merges overlapping or touching intervals.
std::vector<Interval> merge_intervals(std::vector<Interval> intervals);

// Total length of the union of the intervals.
double union_length(std::vector<Interval> intervals);

// Frames [begin, end) whose centers (t + 0.5) * period lie inside
// [onset, offset), clipped to [0, n_frames).
struct FrameRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};
FrameRange frames_in(const Interval& span, double frame_period, Eigen::Index n_frames);

// Stream seed derivation: seed' = hash(seed, stream_id).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id);

}  // namespace pairsamp
