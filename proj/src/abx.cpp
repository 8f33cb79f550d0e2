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

#include "pairsamp/abx.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

namespace pairsamp {

std::string_view to_string(AbxMode mode) {
  return mode == AbxMode::within ? "within" : "across";
}

AbxMode parse_abx_mode(std::string_view text) {
  if (text == "within") return AbxMode::within;
  if (text == "across") return AbxMode::across;
  throw InputError("unknown ABX mode '" + std::string(text) + "' (expected within or across)");
}

std::vector<TriphoneToken> extract_triphones(const PhoneAlignment& alignment,
                                             const Corpus& corpus) {
  const auto speakers = corpus.speaker_of_file();
  std::vector<TriphoneToken> items;
  for (const auto& [file, segs] : alignment) {
    const auto it = speakers.find(file);
    const std::string speaker = it != speakers.end() ? it->second : file;
    for (std::size_t i = 0; i + 2 < segs.size(); ++i) {
      TriphoneToken t;
      t.prev = segs[i].phone;
      t.center = segs[i + 1].phone;
      t.next = segs[i + 2].phone;
      t.speaker_id = speaker;
      t.file_id = file;
      t.onset = segs[i].onset;
      t.offset = segs[i + 2].offset;
      items.push_back(std::move(t));
    }
  }
  return items;
}

AbxTask build_abx_task(const PhoneAlignment& alignment, const Corpus& corpus, AbxMode mode) {
  return build_abx_task(alignment, corpus, mode, 0, 0);
}

AbxTask build_abx_task(const PhoneAlignment& alignment, const Corpus& corpus, AbxMode mode,
                       int max_items_per_group, std::uint64_t seed) {
  AbxTask task;
  task.mode = mode;
  task.items = extract_triphones(alignment, corpus);

  // context -> center -> speaker -> items
  using SpeakerGroups = std::map<std::string, std::vector<int>>;
  using CenterGroups = std::map<std::string, SpeakerGroups>;
  std::map<std::pair<std::string, std::string>, CenterGroups> groups;
  for (std::size_t i = 0; i < task.items.size(); ++i) {
    const auto& t = task.items[i];
    groups[{t.prev, t.next}][t.center][t.speaker_id].push_back(static_cast<int>(i));
  }
  if (max_items_per_group > 0) {
    std::uint64_t stream = 0;
    for (auto& [ctx, centers] : groups)
      for (auto& [center, speakers] : centers)
        for (auto& [spk, members] : speakers) {
          ++stream;
          if (static_cast<int>(members.size()) <= max_items_per_group) continue;
          Rng rng(derive_seed(seed, stream));
          std::shuffle(members.begin(), members.end(), rng);
          members.resize(static_cast<std::size_t>(max_items_per_group));
          std::sort(members.begin(), members.end());
        }
  }

  for (const auto& [ctx, centers] : groups) {
    for (const auto& [x, x_speakers] : centers) {
      for (const auto& [y, y_speakers] : centers) {
        if (x == y) continue;
        for (const auto& [spk_a, a_items] : x_speakers) {
          const auto b_it = y_speakers.find(spk_a);
          if (b_it == y_speakers.end()) continue;
          const auto make_cell = [&](const std::string& spk_x, const std::vector<int>& x_items) {
            AbxCell cell;
            cell.prev = ctx.first;
            cell.next = ctx.second;
            cell.center_x = x;
            cell.center_y = y;
            cell.speaker_a = spk_a;
            cell.speaker_x = spk_x;
            cell.items_a = a_items;
            cell.items_b = b_it->second;
            cell.items_x = x_items;
            task.cells.push_back(std::move(cell));
          };
          if (mode == AbxMode::within) {
            // X must be a different token than A.
            if (a_items.size() >= 2) make_cell(spk_a, a_items);
          } else {
            for (const auto& [spk_x, x_items] : x_speakers)
              if (spk_x != spk_a) make_cell(spk_x, x_items);
          }
        }
      }
    }
  }
  return task;
}

double token_dissimilarity(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0)
    throw InputError("token_dissimilarity: empty frame matrix");
  return dtw(a, b, FrameDistance::cosine).normalized_cost();
}

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

AbxResult evaluate_abx(const AbxTask& task, const FeatureArchive& archive) {
  if (task.cells.empty()) throw InputError("evaluate_abx: empty task");
  AbxResult result;
  result.mode = task.mode;

  std::unordered_map<int, Matrix> frames;
  const auto item_frames = [&](int i) -> const Matrix& {
    auto it = frames.find(i);
    if (it != frames.end()) return it->second;
    const auto& item = task.items[static_cast<std::size_t>(i)];
    const auto& fm = archive.at(item.file_id);
    const auto r = frames_in({item.onset, item.offset}, fm.frame_period, fm.data.rows());
    if (r.size() == 0)
      throw InputError("evaluate_abx: triphone " + item.prev + "-" + item.center + "-" +
                       item.next + " in " + item.file_id + " has no frames");
    return frames.emplace(i, fm.data.middleRows(r.begin, r.size())).first->second;
  };
  std::unordered_map<std::uint64_t, double> memo;
  const auto distance = [&](int i, int j) {
    const auto lo = static_cast<std::uint64_t>(std::min(i, j));
    const auto hi = static_cast<std::uint64_t>(std::max(i, j));
    const std::uint64_t key = (lo << 32) | hi;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const double d = token_dissimilarity(item_frames(static_cast<int>(lo)),
                                         item_frames(static_cast<int>(hi)));
    memo.emplace(key, d);
    return d;
  };

  // (x, y) -> context -> speaker-condition scores
  std::map<std::pair<std::string, std::string>,
           std::map<std::pair<std::string, std::string>, std::vector<double>>>
      by_centers;
  result.cell_scores.resize(task.cells.size());
  for (std::size_t c = 0; c < task.cells.size(); ++c) {
    const auto& cell = task.cells[c];
    double total = 0.0;
    long n = 0;
    for (int x : cell.items_x) {
      for (int a : cell.items_a) {
        if (a == x) continue;
        const double dax = distance(a, x);
        for (int b : cell.items_b) {
          const double dbx = distance(b, x);
          total += dax < dbx ? 1.0 : (dax == dbx ? 0.5 : 0.0);
          ++n;
        }
      }
    }
    if (n == 0) continue;
    auto& score = result.cell_scores[c];
    score.n_triples = n;
    score.score = total / static_cast<double>(n);
    result.n_triples += n;
    ++result.n_cells;
    by_centers[{cell.center_x, cell.center_y}][{cell.prev, cell.next}].push_back(score.score);
  }
  if (by_centers.empty()) throw InputError("evaluate_abx: no cell has a valid triple");

  std::vector<double> per_center_pair;
  for (const auto& [centers, contexts] : by_centers) {
    std::vector<double> per_context;
    for (const auto& [ctx, speaker_scores] : contexts) per_context.push_back(mean(speaker_scores));
    per_center_pair.push_back(mean(per_context));
  }
  result.discriminability = mean(per_center_pair);
  result.error = 1.0 - result.discriminability;
  return result;
}

void write_abx_tsv(const AbxTask& task, const AbxResult& result,
                   const std::filesystem::path& path) {
  using detail::format_double;
  auto out = detail::open_output(path);
  out << "context\tcenters\tspeakers\tn_triples\tscore\terror\n";
  for (std::size_t c = 0; c < task.cells.size(); ++c) {
    const auto& cell = task.cells[c];
    const auto& s = result.cell_scores[c];
    if (s.n_triples == 0) continue;
    out << cell.prev << '_' << cell.next << '\t' << cell.center_x << '/' << cell.center_y << '\t'
        << cell.speaker_a;
    if (task.mode == AbxMode::across) out << '|' << cell.speaker_x;
    out << '\t' << s.n_triples << '\t' << format_double(s.score) << '\t'
        << format_double(1.0 - s.score) << '\n';
  }
  out << "aggregate\t*\t" << to_string(task.mode) << '\t' << result.n_triples << '\t'
      << format_double(result.discriminability) << '\t' << format_double(result.error) << '\n';
}

AbxTsvSummary read_abx_tsv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  AbxTsvSummary summary;
  std::string line;
  long line_no = 0;
  bool found = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || detail::trim(line).empty()) continue;
    const auto where = detail::location(path, line_no);
    const auto f = detail::split_fields(line, '\t');
    if (f.size() != 6) throw InputError(where + ": expected 6 tab-separated fields");
    if (f[0] == "aggregate") {
      summary.mode = f[2];
      summary.n_triples = detail::parse_long(f[3], where);
      summary.discriminability = detail::parse_double(f[4], where);
      summary.error = detail::parse_double(f[5], where);
      found = true;
    } else {
      ++summary.n_cells;
    }
  }
  if (!found) throw InputError(path.string() + ": no aggregate row");
  return summary;
}

}  // namespace pairsamp
