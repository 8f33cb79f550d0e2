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

#include "pairsamp/features.hpp"

#include "text_util.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

namespace pairsamp {

void validate(const FbankConfig& cfg) {
  if (!(cfg.sample_rate > 0.0)) throw InputError("fbank: sample_rate must be > 0");
  if (!(cfg.hop > 0.0 && cfg.window_len > cfg.hop))
    throw InputError("fbank: need window_len > hop > 0");
  if (cfg.n_mels < 1) throw InputError("fbank: n_mels must be >= 1");
  if (!(cfg.energy_floor > 0.0)) throw InputError("fbank: energy_floor must be > 0");
}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::raw: return "raw";
    case FeatureKind::stacked: return "stacked";
    case FeatureKind::embedded: return "embedded";
  }
  return "raw";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "raw") return FeatureKind::raw;
  if (text == "stacked") return FeatureKind::stacked;
  if (text == "embedded") return FeatureKind::embedded;
  throw InputError("unknown feature kind '" + std::string(text) + "'");
}

void FeatureArchive::add(FeatureMatrix fm) {
  if (files.empty() && dim == 0) dim = fm.data.cols();
  if (fm.data.cols() != dim)
    throw InputError("feature archive: file " + fm.file_id + " has " +
                     std::to_string(fm.data.cols()) + " columns, archive has " +
                     std::to_string(dim));
  auto key = fm.file_id;
  files[key] = std::move(fm);
}

const FeatureMatrix& FeatureArchive::at(const std::string& file_id) const {
  const auto it = files.find(file_id);
  if (it == files.end()) throw InputError("feature archive has no file '" + file_id + "'");
  return it->second;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(const FbankConfig& cfg) {
  const double top = hz_to_mel(cfg.sample_rate / 2.0);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[i] = mel_to_hz(top * i / static_cast<double>(cfg.n_mels + 1));
  return edges;
}

// n_mels x (nfft/2 + 1) triangular weights.
Matrix mel_weights(const FbankConfig& cfg, int nfft) {
  const auto edges = mel_edges(cfg);
  const int n_bins = nfft / 2 + 1;
  Matrix w = Matrix::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * cfg.sample_rate / nfft;
      if (f > left && f <= center)
        w(m, k) = (f - left) / (center - left);
      else if (f > center && f < right)
        w(m, k) = (right - f) / (right - center);
    }
  }
  return w;
}

}  // namespace

std::vector<double> mel_center_frequencies(const FbankConfig& cfg) {
  const auto edges = mel_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

FeatureMatrix extract_filterbank(std::span<const double> pcm, const FbankConfig& cfg,
                                 std::string file_id) {
  validate(cfg);
  const auto window = static_cast<long>(std::lround(cfg.window_len * cfg.sample_rate));
  const auto hop = static_cast<long>(std::lround(cfg.hop * cfg.sample_rate));
  const auto n = static_cast<long>(pcm.size());
  if (n < window)
    throw InputError("extract_filterbank: " + std::to_string(n) +
                     " samples is shorter than one window of " + std::to_string(window));
  for (double s : pcm)
    if (!std::isfinite(s)) throw InputError("extract_filterbank: non-finite sample");

  const int nfft = static_cast<int>(std::bit_ceil(static_cast<unsigned long>(window)));
  const Matrix weights = mel_weights(cfg, nfft);
  std::vector<double> hamming(window);
  for (long i = 0; i < window; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (window - 1));

  const long n_frames = 1 + (n - window) / hop;
  FeatureMatrix fm;
  fm.file_id = std::move(file_id);
  fm.frame_period = cfg.hop;
  fm.data.resize(n_frames, cfg.n_mels);

  Eigen::FFT<double> fft;
  std::vector<double> frame(nfft, 0.0);
  std::vector<std::complex<double>> spectrum;
  Vector power(nfft / 2 + 1);
  for (long t = 0; t < n_frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (long i = 0; i < window; ++i) frame[i] = pcm[t * hop + i] * hamming[i];
    fft.fwd(spectrum, frame);
    for (int k = 0; k <= nfft / 2; ++k) power(k) = std::norm(spectrum[k]);
    const Vector energies = weights * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      fm.data(t, m) = std::log(std::max(energies(m), cfg.energy_floor));
  }
  return fm;
}

FeatureMatrix normalize_per_file(const FeatureMatrix& fm, std::span<const Interval> vad) {
  const Eigen::Index n = fm.data.rows();
  std::vector<bool> inside(n, false);
  for (const auto& iv : vad) {
    const auto r = frames_in(iv, fm.frame_period, n);
    for (auto t = r.begin; t < r.end; ++t) inside[t] = true;
  }
  const auto count = std::count(inside.begin(), inside.end(), true);
  if (count == 0)
    throw InputError("normalize_per_file: no frame of " + fm.file_id + " lies inside its VAD");

  RowVec<double> mean = RowVec<double>::Zero(fm.data.cols());
  for (Eigen::Index t = 0; t < n; ++t)
    if (inside[t]) mean += fm.data.row(t);
  mean /= static_cast<double>(count);
  RowVec<double> var = RowVec<double>::Zero(fm.data.cols());
  for (Eigen::Index t = 0; t < n; ++t)
    if (inside[t]) var += (fm.data.row(t) - mean).array().square().matrix();
  var /= static_cast<double>(count);
  const RowVec<double> inv_std = var.array().sqrt().max(1e-8).inverse().matrix();

  FeatureMatrix out = fm;
  out.data.rowwise() -= mean;
  out.data = (out.data.array().rowwise() * inv_std.array()).matrix();
  return out;
}

FeatureMatrix stack_context(const FeatureMatrix& fm, int width) {
  if (width < 1 || width % 2 == 0)
    throw InputError("stack_context: width must be a positive odd integer, got " +
                     std::to_string(width));
  const Eigen::Index n = fm.data.rows();
  const Eigen::Index dim = fm.data.cols();
  const int half = width / 2;
  FeatureMatrix out;
  out.file_id = fm.file_id;
  out.frame_period = fm.frame_period;
  out.data.resize(n, dim * width);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int k = -half; k <= half; ++k) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t + k, 0, n - 1);
      out.data.block(t, (k + half) * dim, 1, dim) = fm.data.row(src);
    }
  }
  return out;
}

FeatureArchive normalize_archive(const FeatureArchive& archive,
                                 const std::map<std::string, std::vector<Interval>>& vad) {
  FeatureArchive out;
  out.kind = archive.kind;
  out.frame_period = archive.frame_period;
  out.dim = archive.dim;
  for (const auto& [file, fm] : archive.files) {
    const auto it = vad.find(file);
    if (it == vad.end()) throw InputError("normalize: no VAD for file " + file);
    out.add(normalize_per_file(fm, it->second));
  }
  return out;
}

FeatureArchive stack_archive(const FeatureArchive& archive, int width) {
  FeatureArchive out;
  out.kind = FeatureKind::stacked;
  out.frame_period = archive.frame_period;
  out.dim = archive.dim * width;
  for (const auto& [file, fm] : archive.files) out.add(stack_context(fm, width));
  return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto bad = [&](const std::string& why) {
    return InputError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw bad("not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  WavData wav;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    if (pos + 8 + size > bytes.size()) throw bad("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw bad("short fmt chunk");
      const auto format = get_u16(chunk + 8);
      const auto channels = get_u16(chunk + 10);
      wav.sample_rate = get_u32(chunk + 12);
      const auto bits = get_u16(chunk + 22);
      if (format != 1 || channels != 1 || bits != 16)
        throw bad("only 16-bit PCM mono is supported");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(get_u16(chunk + 8 + 2 * i));
        wav.samples[i] = raw / 32768.0;
      }
      return wav;
    }
    pos += 8 + size + (size & 1);
  }
  throw bad("no data chunk");
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate) {
  auto out = detail::open_output(path, std::ios::binary);
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (double s : samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
}

void write_archive(const FeatureArchive& archive, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto manifest = detail::open_output(dir / "manifest.tsv");
  manifest << "file_id\trows\tcols\tframe_period\tkind\n";
  for (const auto& [file, fm] : archive.files) {
    manifest << file << '\t' << fm.data.rows() << '\t' << fm.data.cols() << '\t'
             << detail::format_double(fm.frame_period) << '\t' << to_string(archive.kind) << '\n';
    auto out = detail::open_output(dir / (file + ".fbk"), std::ios::binary);
    out.write("FBNK", 4);
    put_u32(out, static_cast<std::uint32_t>(fm.data.rows()));
    put_u32(out, static_cast<std::uint32_t>(fm.data.cols()));
    for (Eigen::Index i = 0; i < fm.data.rows(); ++i)
      for (Eigen::Index j = 0; j < fm.data.cols(); ++j)
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(fm.data(i, j))));
  }
}

FeatureArchive read_archive(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.tsv";
  auto in = detail::open_input(manifest_path);
  FeatureArchive archive;
  std::string line;
  long line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (first) {
      first = false;
      if (line.rfind("file_id", 0) == 0) continue;
    }
    if (detail::trim(line).empty()) continue;
    const auto where = detail::location(manifest_path, line_no);
    const auto f = detail::split_fields(line, '\t');
    if (f.size() != 5) throw InputError(where + ": expected 5 tab-separated fields");
    const long rows = detail::parse_long(f[1], where);
    const long cols = detail::parse_long(f[2], where);
    const double period = detail::parse_double(f[3], where);
    archive.kind = parse_feature_kind(f[4]);
    archive.frame_period = period;

    const auto bin_path = dir / (f[0] + ".fbk");
    const auto bytes = slurp(bin_path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "FBNK", 4) != 0)
      throw InputError(bin_path.string() + ": bad magic");
    if (get_u32(bytes.data() + 4) != static_cast<std::uint32_t>(rows) ||
        get_u32(bytes.data() + 8) != static_cast<std::uint32_t>(cols))
      throw InputError(bin_path.string() + ": shape disagrees with manifest");
    if (bytes.size() != 12 + 4 * static_cast<std::size_t>(rows * cols))
      throw InputError(bin_path.string() + ": truncated payload");
    FeatureMatrix fm;
    fm.file_id = f[0];
    fm.frame_period = period;
    fm.data.resize(rows, cols);
    const unsigned char* p = bytes.data() + 12;
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j, p += 4)
        fm.data(i, j) = std::bit_cast<float>(get_u32(p));
    if (archive.files.empty()) archive.dim = cols;
    archive.add(std::move(fm));
  }
  return archive;
}

}  // namespace pairsamp
