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

// Slow, independent reference computations shared by the unit tests and
// the acceptance binary.

#include "pairsamp/abx.hpp"
#include "pairsamp/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

using pairsamp::Matrix;

// Minimum total cost over every monotone path, by plain enumeration.
inline double dtw_cost(const Matrix& dist) {
  const Eigen::Index n = dist.rows(), m = dist.cols();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i,
                                                                     Eigen::Index j, double acc) {
    acc += dist(i, j);
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

inline Matrix cosine_distances(const Matrix& a, const Matrix& b) {
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double na = a.row(i).norm(), nb = b.row(j).norm();
      d(i, j) = na == 0 || nb == 0 ? 1.0 : 1.0 - a.row(i).dot(b.row(j)) / (na * nb);
    }
  return d;
}

// A small random ABX world: a few speakers, short phone strings drawn
// from two contexts and three centers, integer-valued frames so that
// ties and zero-norm frames occur.
struct MicroWorld {
  pairsamp::Corpus corpus;
  pairsamp::PhoneAlignment alignment;
  pairsamp::FeatureArchive archive;
};

inline MicroWorld micro_world(std::mt19937_64& rng, int n_speakers, int files_per_speaker,
                              int phones_per_file, int dim = 3) {
  MicroWorld w;
  const std::vector<std::string> phones{"b", "d", "a", "e", "i"};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(phones.size()) - 1);
  std::uniform_int_distribution<int> len(1, 3);
  std::uniform_int_distribution<int> val(-1, 2);
  for (int s = 0; s < n_speakers; ++s) {
    for (int f = 0; f < files_per_speaker; ++f) {
      const std::string file = "s" + std::to_string(s) + "f" + std::to_string(f);
      std::vector<pairsamp::PhoneSegment> segs;
      int frame = 0;
      for (int p = 0; p < phones_per_file; ++p) {
        const int l = len(rng);
        segs.push_back({phones[static_cast<std::size_t>(pick(rng))], frame * 0.01,
                        (frame + l) * 0.01});
        frame += l;
      }
      pairsamp::FeatureMatrix fm;
      fm.file_id = file;
      fm.data.resize(frame, dim);
      for (Eigen::Index i = 0; i < fm.data.size(); ++i) fm.data.data()[i] = val(rng);
      w.archive.add(std::move(fm));
      w.alignment[file] = segs;
      w.corpus.utterances.push_back({file, "spk" + std::to_string(s), {{0.0, frame * 0.01}}});
    }
  }
  return w;
}

struct AbxOracleResult {
  double error = 0.0;
  long n_triples = 0;
  long n_cells = 0;
};

// Every (a, b, x) triple of triphones, scored and averaged over speaker
// conditions, then contexts, then center pairs.
inline AbxOracleResult abx(const MicroWorld& w, pairsamp::AbxMode mode) {
  struct Item {
    std::string prev, center, next, speaker;
    Matrix frames;
  };
  std::vector<Item> items;
  for (const auto& [file, segs] : w.alignment) {
    std::string speaker;
    for (const auto& u : w.corpus.utterances)
      if (u.file_id == file) speaker = u.speaker_id;
    const auto& data = w.archive.at(file).data;
    for (std::size_t i = 0; i + 2 < segs.size(); ++i) {
      // frames whose centers fall inside [onset of first, offset of third)
      std::vector<Eigen::Index> rows;
      for (Eigen::Index t = 0; t < data.rows(); ++t) {
        const double c = (static_cast<double>(t) + 0.5) * 0.01;
        if (c >= segs[i].onset && c < segs[i + 2].offset) rows.push_back(t);
      }
      Matrix f(static_cast<Eigen::Index>(rows.size()), data.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) f.row(static_cast<Eigen::Index>(r)) = data.row(rows[r]);
      items.push_back({segs[i].phone, segs[i + 1].phone, segs[i + 2].phone, speaker, f});
    }
  }
  using CenterKey = std::pair<std::string, std::string>;
  using ContextKey = std::pair<std::string, std::string>;
  using SpeakerKey = std::pair<std::string, std::string>;
  std::map<CenterKey, std::map<ContextKey, std::map<SpeakerKey, std::pair<double, long>>>> acc;
  AbxOracleResult out;
  for (std::size_t a = 0; a < items.size(); ++a)
    for (std::size_t b = 0; b < items.size(); ++b)
      for (std::size_t x = 0; x < items.size(); ++x) {
        const auto &A = items[a], &B = items[b], &X = items[x];
        if (A.prev != B.prev || A.next != B.next || A.prev != X.prev || A.next != X.next) continue;
        if (A.center != X.center || A.center == B.center) continue;
        if (A.speaker != B.speaker) continue;
        if (mode == pairsamp::AbxMode::within ? (X.speaker != A.speaker || x == a)
                                              : X.speaker == A.speaker)
          continue;
        const double dax = pairsamp::token_dissimilarity(A.frames, X.frames);
        const double dbx = pairsamp::token_dissimilarity(B.frames, X.frames);
        auto& cell = acc[{A.center, B.center}][{A.prev, A.next}][{A.speaker, X.speaker}];
        cell.first += dax < dbx ? 1.0 : dax == dbx ? 0.5 : 0.0;
        ++cell.second;
        ++out.n_triples;
      }
  double total = 0;
  for (const auto& [centers, contexts] : acc) {
    double ctx_sum = 0;
    for (const auto& [ctx, speakers] : contexts) {
      double spk_sum = 0;
      for (const auto& [spk, cell] : speakers) {
        spk_sum += cell.first / static_cast<double>(cell.second);
        ++out.n_cells;
      }
      ctx_sum += spk_sum / static_cast<double>(speakers.size());
    }
    total += ctx_sum / static_cast<double>(contexts.size());
  }
  out.error = acc.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : 1.0 - total / static_cast<double>(acc.size());
  return out;
}

// Parameter views shared by the finite-difference check.
template <typename Scalar>
std::vector<Scalar*> parameter_slots(pairsamp::NetworkParams<Scalar>& p) {
  std::vector<Scalar*> out;
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
    for (Eigen::Index i = 0; i < l.bn_scale.size(); ++i) out.push_back(l.bn_scale.data() + i);
    for (Eigen::Index i = 0; i < l.bn_shift.size(); ++i) out.push_back(l.bn_shift.data() + i);
  }
  return out;
}

template <typename Scalar>
std::vector<Scalar> flatten(const pairsamp::Gradients<Scalar>& g) {
  std::vector<Scalar> out;
  for (const auto& l : g) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    out.insert(out.end(), l.bn_scale.data(), l.bn_scale.data() + l.bn_scale.size());
    out.insert(out.end(), l.bn_shift.data(), l.bn_shift.data() + l.bn_shift.size());
  }
  return out;
}

struct GradCheck {
  long n_params = 0;
  double max_rel_error = 0.0;
};

// Five-point central differences of the train-mode loss in long double.
// The relative error is |a - n| / max(|a|, |n|, 1e-8). A step that moves
// some different-word row across the hinge is halved until none does.
inline GradCheck check_gradients(const pairsamp::NetworkParams<double>& params, const Matrix& x1,
                                 const Matrix& x2, const pairsamp::Vector& y) {
  using L = long double;
  using pairsamp::Mode;
  auto p = params.cast<L>();
  const pairsamp::RowMatrix<L> a = x1.cast<L>(), b = x2.cast<L>();
  auto grads = pairsamp::zero_gradients(p);
  pairsamp::loss_and_gradients<L>(p, a, b, y, grads);
  const auto analytic = flatten(grads);

  const L gamma = static_cast<L>(params.config.margin);
  const auto hinge_pattern = [&]() {
    const auto t = pairsamp::row_cosines<L>(pairsamp::forward(p, a, Mode::train),
                                            pairsamp::forward(p, b, Mode::train));
    std::vector<bool> active;
    for (Eigen::Index i = 0; i < t.cos.size(); ++i) active.push_back(y(i) < 0 && t.cos(i) > gamma);
    return active;
  };
  const auto loss = [&]() {
    return pairsamp::margin_cosine_loss<L>(pairsamp::forward(p, a, Mode::train),
                                           pairsamp::forward(p, b, Mode::train), y,
                                           params.config.margin);
  };
  const auto base_pattern = hinge_pattern();

  GradCheck out;
  auto slots = parameter_slots(p);
  out.n_params = static_cast<long>(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    L* w = slots[k];
    const L w0 = *w;
    L h = 1e-3L;
    L numeric = 0;
    for (int tries = 0; tries < 30; ++tries, h /= 2) {
      bool crosses = false;
      L f[4];
      const L steps[4] = {-2, -1, 1, 2};
      for (int s = 0; s < 4; ++s) {
        *w = w0 + steps[s] * h;
        crosses |= hinge_pattern() != base_pattern;
        f[s] = loss();
      }
      *w = w0;
      numeric = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h);
      if (!crosses) break;
    }
    const L an = analytic[k];
    const L denom = std::max({std::abs(an), std::abs(numeric), 1e-8L});
    out.max_rel_error =
        std::max(out.max_rel_error, static_cast<double>(std::abs(an - numeric) / denom));
  }
  return out;
}

}  // namespace oracle
