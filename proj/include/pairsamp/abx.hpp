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

#include "pairsamp/align.hpp"
#include "pairsamp/corpus.hpp"
#include "pairsamp/features.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pairsamp {

enum class AbxMode { within, across };

std::string_view to_string(AbxMode mode);
AbxMode parse_abx_mode(std::string_view text);

// Three consecutive phones of one file; the time span covers all three.
struct TriphoneToken {
  std::string prev;
  std::string center;
  std::string next;
  std::string speaker_id;
  std::string file_id;
  double onset = 0.0;
  double offset = 0.0;
};

// A and X carry center x, B carries center y, all in the same context.
// Within: one speaker for all roles. Across: A and B from speaker_a, X from
// speaker_x. Items are indices into AbxTask::items.
struct AbxCell {
  std::string prev, next;
  std::string center_x, center_y;
  std::string speaker_a, speaker_x;
  std::vector<int> items_a, items_b, items_x;
};

struct AbxTask {
  AbxMode mode = AbxMode::within;
  std::vector<TriphoneToken> items;
  std::vector<AbxCell> cells;
};

struct AbxCellScore {
  long n_triples = 0;
  double score = 0.0;
};

struct AbxResult {
  AbxMode mode = AbxMode::within;
  std::vector<AbxCellScore> cell_scores;  // parallel to task.cells
  double discriminability = 0.0;
  double error = 0.0;
  long n_triples = 0;
  long n_cells = 0;
};

std::vector<TriphoneToken> extract_triphones(const PhoneAlignment& alignment, const Corpus& corpus);

// Every (context, ordered center pair, speaker assignment) cell with at
// least one valid (a, b, x) triple; in within mode x must differ from a.
AbxTask build_abx_task(const PhoneAlignment& alignment, const Corpus& corpus, AbxMode mode);

// Keeps at most max_items per (context, center, speaker) group, chosen
// deterministically from seed, before cells are built.
AbxTask build_abx_task(const PhoneAlignment& alignment, const Corpus& corpus, AbxMode mode,
                       int max_items_per_group, std::uint64_t seed);

// Path-length-normalized DTW cost under the cosine frame distance.
double token_dissimilarity(const Matrix& a, const Matrix& b);

// Cell score = mean over valid triples of 1{d(a,x) < d(b,x)} with ties at
// 0.5. Cells are averaged over speakers (within) or speaker pairs (across),
// then over contexts, then over center pairs.
AbxResult evaluate_abx(const AbxTask& task, const FeatureArchive& archive);

void write_abx_tsv(const AbxTask& task, const AbxResult& result, const std::filesystem::path& path);

struct AbxTsvSummary {
  std::string mode;
  long n_triples = 0;
  double discriminability = 0.0;
  double error = 0.0;
  long n_cells = 0;
};
AbxTsvSummary read_abx_tsv(const std::filesystem::path& path);

}  // namespace pairsamp
