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

#include "pairsamp/experiment.hpp"

#include "text_util.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace pairsamp {

std::string sweep_axis_key(const std::string& axis) {
  if (axis == "phi") return "sampler.phi";
  if (axis == "p_diff_speaker") return "sampler.p_diff_speaker";
  if (axis == "p_diff_word") return "sampler.p_diff_word";
  if (axis == "fraction") return "corpus.fraction";
  if (axis == "dtw_threshold_file") return "corpus.class_file";
  throw InputError("unknown sweep axis '" + axis +
                   "' (expected phi, p_diff_speaker, p_diff_word, fraction or dtw_threshold_file)");
}

void validate(const SweepSpec& spec) {
  sweep_axis_key(spec.axis);
  if (spec.values.empty()) throw InputError("sweep: no values given");
  if (spec.seeds.empty()) throw InputError("sweep: no seeds given");
}

namespace {

// Directory-safe rendering of a sweep value.
std::string slug(const std::string& value) {
  std::string out;
  for (char c : std::filesystem::path(value).filename().string())
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out.empty() ? "v" : out;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ConfigMap& base, const SweepSpec& spec,
                                const std::filesystem::path& out_dir, int jobs) {
  validate(spec);
  const auto key = sweep_axis_key(spec.axis);
  struct Job {
    std::size_t value_index;
    std::uint64_t seed;
  };
  std::vector<Job> queue;
  for (std::size_t v = 0; v < spec.values.size(); ++v)
    for (auto s : spec.seeds) queue.push_back({v, s});

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<SweepRow> rows(queue.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < queue.size(); i = next++) {
      const auto& job = queue[i];
      auto& row = rows[i];
      row.value = spec.values[job.value_index];
      row.seed = job.seed;
      row.within_error = row.across_error = row.baseline_within = row.baseline_across = nan;
      const auto dir = out_dir / ("v" + std::to_string(job.value_index) + "_" + slug(row.value)) /
                       ("seed_" + std::to_string(job.seed));
      try {
        auto config = base;
        config[key] = row.value;
        if (spec.axis == "dtw_threshold_file") config["corpus.source"] = "classes";
        config["sampler.seed"] = std::to_string(job.seed);
        config["train.seed"] = std::to_string(job.seed);
        const auto summary = run_experiment(resolve_config(config), dir);
        if (const auto w = summary.find(AbxMode::within)) {
          row.within_error = w->embedded_error;
          row.baseline_within = w->baseline_error;
        }
        if (const auto a = summary.find(AbxMode::across)) {
          row.across_error = a->embedded_error;
          row.baseline_across = a->baseline_error;
        }
        row.collapsed = summary.collapsed;
        row.status = "ok";
      } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
          if (c == '\t' || c == '\n') c = ' ';
        row.status = "failed: " + msg;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(queue.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  write_sweep_tsv(spec.axis, rows, out_dir / "sweep.tsv");
  auto svg = detail::open_output(out_dir / "sweep.svg");
  svg << sweep_svg(spec.axis, rows);
  return rows;
}

}  // namespace pairsamp
