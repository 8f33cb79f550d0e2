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

#include "pairsamp/types.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pairsamp {

struct FbankConfig {
  double sample_rate = 16000.0;
  double window_len = 0.025;
  double hop = 0.010;
  int n_mels = 40;
  double energy_floor = 1e-10;
};

void validate(const FbankConfig& cfg);

enum class FeatureKind { raw, stacked, embedded };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

struct FeatureMatrix {
  std::string file_id;
  double frame_period = 0.01;
  Matrix data;  // T x F, one row per frame
};

struct FeatureArchive {
  FeatureKind kind = FeatureKind::raw;
  double frame_period = 0.01;
  Eigen::Index dim = 0;
  std::map<std::string, FeatureMatrix> files;

  // Inserts fm, enforcing a uniform column count across the archive.
  void add(FeatureMatrix fm);
  const FeatureMatrix& at(const std::string& file_id) const;
  bool contains(const std::string& file_id) const { return files.count(file_id) > 0; }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequency (Hz) of each triangular filter.
std::vector<double> mel_center_frequencies(const FbankConfig& cfg);

// Log mel filterbank energies. Frames are not padded:
// T = 1 + floor((N - window) / hop).
FeatureMatrix extract_filterbank(std::span<const double> pcm, const FbankConfig& cfg,
                                 std::string file_id = {});

// Per-column mean/variance normalization with statistics from the frames
// whose centers fall inside the VAD intervals.
FeatureMatrix normalize_per_file(const FeatureMatrix& fm, std::span<const Interval> vad);

// Row t becomes frames t-w/2 .. t+w/2 concatenated, edges replicated.
FeatureMatrix stack_context(const FeatureMatrix& fm, int width = 7);

FeatureArchive normalize_archive(const FeatureArchive& archive,
                                 const std::map<std::string, std::vector<Interval>>& vad);
FeatureArchive stack_archive(const FeatureArchive& archive, int width = 7);

struct WavData {
  double sample_rate = 0.0;
  std::vector<double> samples;  // scaled to [-1, 1)
};

// PCM 16-bit mono RIFF/WAVE.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate);

// manifest.tsv plus one FBNK binary per file.
void write_archive(const FeatureArchive& archive, const std::filesystem::path& dir);
FeatureArchive read_archive(const std::filesystem::path& dir);

}  // namespace pairsamp
