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

#include "pairsamp/discovery.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace pairsamp {

std::size_t DiscoveredClusters::n_fragments() const {
  std::size_t n = 0;
  for (const auto& [id, frags] : clusters) n += frags.size();
  return n;
}

DiscoveredClusters parse_class_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  DiscoveredClusters result;
  std::string line;
  long line_no = 0;
  bool in_class = false;
  const auto close_class = [&](long where_line) {
    if (in_class && result.clusters.back().second.empty())
      throw InputError(detail::location(path, where_line) + ": class " +
                       result.clusters.back().first + " has no fragments");
    in_class = false;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = detail::location(path, line_no);
    if (detail::trim(line).empty()) {
      close_class(line_no);
      continue;
    }
    if (detail::trim(line).front() == '#') continue;
    const auto f = detail::split_fields(line);
    if (f[0] == "Class") {
      if (f.size() != 2) throw InputError(where + ": expected 'Class <id>'");
      close_class(line_no);
      result.clusters.emplace_back(f[1], std::vector<Fragment>{});
      in_class = true;
      continue;
    }
    if (!in_class) throw InputError(where + ": fragment line outside a Class block");
    if (f.size() != 3)
      throw InputError(where + ": expected 'file onset offset', got " + std::to_string(f.size()) +
                       " fields");
    Fragment frag{f[0], detail::parse_double(f[1], where), detail::parse_double(f[2], where)};
    if (!(frag.offset > frag.onset)) throw InputError(where + ": fragment offset must exceed onset");
    result.clusters.back().second.push_back(std::move(frag));
  }
  close_class(line_no);
  return result;
}

void write_class_file(const DiscoveredClusters& clusters, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& [id, frags] : clusters.clusters) {
    out << "Class " << id << '\n';
    for (const auto& f : frags)
      out << f.file_id << ' ' << detail::format_double(f.onset) << ' '
          << detail::format_double(f.offset) << '\n';
    out << '\n';
  }
}

std::vector<std::string> fragment_transcription(const Fragment& fragment,
                                                const std::vector<PhoneSegment>& phones) {
  constexpr double kMinOverlap = 0.030;
  std::vector<std::string> out;
  for (const auto& p : phones) {
    const double overlap =
        std::min(p.offset, fragment.offset) - std::max(p.onset, fragment.onset);
    if (overlap <= 0.0) continue;
    const double duration = p.offset - p.onset;
    if (overlap >= 0.5 * duration || overlap >= kMinOverlap) out.push_back(p.phone);
  }
  return out;
}

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

NedResult compute_ned_pairs(const DiscoveredClusters& clusters, const PhoneAlignment& alignment) {
  NedResult result;
  double total = 0.0;
  for (const auto& [id, frags] : clusters.clusters) {
    std::vector<std::vector<std::string>> trans;
    trans.reserve(frags.size());
    for (const auto& f : frags) {
      const auto it = alignment.find(f.file_id);
      if (it == alignment.end())
        throw InputError("compute_ned: fragment of class " + id + " lies in unaligned file " +
                         f.file_id);
      trans.push_back(fragment_transcription(f, it->second));
    }
    for (std::size_t i = 0; i < trans.size(); ++i) {
      for (std::size_t j = i + 1; j < trans.size(); ++j) {
        const std::size_t longest = std::max(trans[i].size(), trans[j].size());
        if (longest == 0) continue;
        total += static_cast<double>(levenshtein(trans[i], trans[j])) /
                 static_cast<double>(longest);
        ++result.n_pairs;
      }
    }
  }
  result.ned = result.n_pairs > 0 ? total / static_cast<double>(result.n_pairs) : 0.0;
  return result;
}

double compute_ned(const DiscoveredClusters& clusters, const PhoneAlignment& alignment) {
  return compute_ned_pairs(clusters, alignment).ned;
}

double compute_coverage(const DiscoveredClusters& clusters, const VadMap& vad) {
  std::map<std::string, std::vector<Interval>> covered;
  for (const auto& [id, frags] : clusters.clusters) {
    for (const auto& f : frags) {
      const auto it = vad.find(f.file_id);
      if (it == vad.end()) throw InputError("compute_coverage: no VAD for file " + f.file_id);
      for (const auto& iv : it->second) {
        const double lo = std::max(iv.onset, f.onset);
        const double hi = std::min(iv.offset, f.offset);
        if (hi > lo) covered[f.file_id].push_back({lo, hi});
      }
    }
  }
  double speech = 0.0;
  for (const auto& [file, ivs] : vad) speech += union_length(ivs);
  if (speech <= 0.0) throw InputError("compute_coverage: VAD contains no speech");
  double hit = 0.0;
  for (auto& [file, ivs] : covered) hit += union_length(std::move(ivs));
  return hit / speech;
}

ClusterEvalReport evaluate_clusters(const DiscoveredClusters& clusters,
                                    const PhoneAlignment& alignment, const VadMap& vad) {
  ClusterEvalReport report;
  report.n_clusters = static_cast<long>(clusters.clusters.size());
  const auto ned = compute_ned_pairs(clusters, alignment);
  report.ned = ned.ned;
  report.n_pairs = ned.n_pairs;
  report.coverage = compute_coverage(clusters, vad);
  return report;
}

void write_std_tsv(const ClusterEvalReport& report, const std::optional<double>& dtw_threshold,
                   const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "dtw_threshold\tn_clusters\tned\tcoverage\tn_pairs\n";
  out << (dtw_threshold ? detail::format_double(*dtw_threshold) : std::string("-")) << '\t'
      << report.n_clusters << '\t' << detail::format_double(report.ned) << '\t'
      << detail::format_double(report.coverage) << '\t' << report.n_pairs << '\n';
}

Corpus clusters_to_corpus(const DiscoveredClusters& clusters,
                          const std::map<std::string, std::string>& speaker_of_file,
                          const VadMap* vad) {
  Corpus corpus;
  std::map<std::string, std::vector<Interval>> fragment_spans;
  std::vector<std::string> file_order;
  for (const auto& [id, frags] : clusters.clusters) {
    const int type_id = static_cast<int>(corpus.labels.size());
    corpus.labels.push_back("class_" + id);
    for (const auto& f : frags) {
      const auto spk = speaker_of_file.find(f.file_id);
      if (spk == speaker_of_file.end())
        throw InputError("clusters_to_corpus: no speaker for file " + f.file_id);
      Token tok;
      tok.token_id = static_cast<int>(corpus.tokens.size());
      tok.type_id = type_id;
      tok.speaker_id = spk->second;
      tok.file_id = f.file_id;
      tok.onset = f.onset;
      tok.offset = f.offset;
      corpus.tokens.push_back(std::move(tok));
      if (!fragment_spans.count(f.file_id)) file_order.push_back(f.file_id);
      fragment_spans[f.file_id].push_back({f.onset, f.offset});
    }
  }
  std::sort(file_order.begin(), file_order.end());
  for (const auto& file : file_order) {
    Utterance u;
    u.file_id = file;
    u.speaker_id = speaker_of_file.at(file);
    const auto it = vad != nullptr ? vad->find(file) : VadMap::const_iterator{};
    if (vad != nullptr && it != vad->end())
      u.vad = it->second;
    else
      u.vad = merge_intervals(fragment_spans[file]);
    corpus.utterances.push_back(std::move(u));
  }
  corpus.type_stats = compute_type_stats(corpus.tokens, corpus.labels);
  return corpus;
}

}  // namespace pairsamp
