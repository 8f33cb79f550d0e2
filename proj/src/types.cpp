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

#include "pairsamp/types.hpp"

#include <algorithm>
#include <cmath>

namespace pairsamp {

std::vector<Interval> merge_intervals(std::vector<Interval> intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.onset < b.onset; });
  std::vector<Interval> merged;
  for (const auto& iv : intervals) {
    if (iv.offset <= iv.onset) continue;
    if (!merged.empty() && iv.onset <= merged.back().offset)
      merged.back().offset = std::max(merged.back().offset, iv.offset);
    else
      merged.push_back(iv);
  }
  return merged;
}

double union_length(std::vector<Interval> intervals) {
  double total = 0.0;
  for (const auto& iv : merge_intervals(std::move(intervals))) total += iv.duration();
  return total;
}

FrameRange frames_in(const Interval& span, double frame_period, Eigen::Index n_frames) {
  // center(t) = (t + 0.5) * period; first t with center >= onset and first
  // t with center >= offset. The slack absorbs decimal round-off in times
  // that sit exactly on a frame center.
  constexpr double kSlack = 1e-9;
  const auto first_at_or_after = [&](double time) {
    return static_cast<Eigen::Index>(std::ceil(time / frame_period - 0.5 - kSlack));
  };
  FrameRange r;
  r.begin = std::clamp<Eigen::Index>(first_at_or_after(span.onset), 0, n_frames);
  r.end = std::clamp<Eigen::Index>(first_at_or_after(span.offset), r.begin, n_frames);
  return r;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed ^ (stream_id + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pairsamp
