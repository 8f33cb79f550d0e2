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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pairsamp {

struct Fragment {
  std::string file_id;
  double onset = 0.0;
  double offset = 0.0;
};

struct DiscoveredClusters {
  // Kept in file order.
  std::vector<std::pair<std::string, std::vector<Fragment>>> clusters;
  std::optional<double> dtw_threshold;

  std::size_t n_fragments() const;
};

struct ClusterEvalReport {
  long n_clusters = 0;
  double ned = 0.0;
  double coverage = 0.0;
  long n_pairs = 0;
};

// "Class <id>" header, one "file onset offset" line per fragment, blank
// line between classes.
DiscoveredClusters parse_class_file(const std::filesystem::path& path);
void write_class_file(const DiscoveredClusters& clusters, const std::filesystem::path& path);

// Phones kept in a fragment's transcription: at least half of the phone,
// or at least 30 ms of it, inside the fragment.
std::vector<std::string> fragment_transcription(const Fragment& fragment,
                                                const std::vector<PhoneSegment>& phones);

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct NedResult {
  double ned = 0.0;
  long n_pairs = 0;
};

// Mean normalized edit distance over all within-cluster fragment pairs,
// pooled across clusters. Zero when there is no pair.
NedResult compute_ned_pairs(const DiscoveredClusters& clusters, const PhoneAlignment& alignment);
double compute_ned(const DiscoveredClusters& clusters, const PhoneAlignment& alignment);

// |union(fragments ∩ VAD)| / |union(VAD)|.
double compute_coverage(const DiscoveredClusters& clusters, const VadMap& vad);

ClusterEvalReport evaluate_clusters(const DiscoveredClusters& clusters,
                                    const PhoneAlignment& alignment, const VadMap& vad);

void write_std_tsv(const ClusterEvalReport& report, const std::optional<double>& dtw_threshold,
                   const std::filesystem::path& path);

// One word type per cluster, one token per fragment. Each file's VAD is
// taken from vad when given, else the union of its fragments.
Corpus clusters_to_corpus(const DiscoveredClusters& clusters,
                          const std::map<std::string, std::string>& speaker_of_file,
                          const VadMap* vad = nullptr);

}  // namespace pairsamp
