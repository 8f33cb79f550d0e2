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

#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>

using namespace pairsamp;

namespace {

// A run small enough for a unit test.
ConfigMap tiny_config() {
  return parse_config_text(R"(
[synth]
vocab_size = 8
tokens_total = 160
n_speakers = 2
feature_dim = 6
tokens_per_utterance = 8

[features]
stack_width = 3

[sampler]
phi = one
p_diff_word = 0.7
p_diff_speaker = 0
pairs_per_epoch = 40

[network]
layer_dims = 18,12,8

[train]
max_epochs = 2
batch_frames = 64

[abx]
max_items = 3
)");
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config parsing") {
  const auto m = parse_config_text("# c\n[sampler]\n; other comment\nphi = cbrt\np_diff_word=0.2\n");
  CHECK(m.at("sampler.phi") == "cbrt");
  CHECK(m.at("sampler.p_diff_word") == "0.2");
  CHECK(message_of([] { parse_config_text("[sampler\nphi=one\n"); }).find("line") !=
        std::string::npos);
}

TEST_CASE("config validation names the key") {
  auto m = tiny_config();
  m.erase("sampler.phi");
  CHECK(message_of([&] { resolve_config(m); }).find("sampler.phi") != std::string::npos);

  m = tiny_config();
  m["sampler.p_diff_word"] = "1.5";
  CHECK(message_of([&] { resolve_config(m); }).find("p_diff_word") != std::string::npos);

  m = tiny_config();
  m["sampler.phii"] = "one";
  CHECK(message_of([&] { resolve_config(m); }).find("sampler.phii") != std::string::npos);

  m = tiny_config();
  m["features.stack_width"] = "4";
  CHECK_THROWS_AS(resolve_config(m), InputError);

  m = tiny_config();
  m["corpus.source"] = "annotations";
  CHECK_THROWS_AS(resolve_config(m), InputError);

  m = tiny_config();
  m["train.max_epochs"] = "two";
  CHECK(message_of([&] { resolve_config(m); }).find("train.max_epochs") != std::string::npos);
}

TEST_CASE("resolved config round trip") {
  const auto cfg = resolve_config(tiny_config());
  CHECK(cfg.sampler.phi == PhiKind::one);
  CHECK(cfg.net.layer_dims == std::vector<int>{18, 12, 8});
  CHECK(cfg.synth.vocab_size == 8);
  const auto full = to_config_map(cfg);
  CHECK(to_config_map(resolve_config(full)) == full);

  testutil::TempDir dir;
  write_config(full, dir / "c.ini");
  CHECK(read_config(dir / "c.ini") == full);
}

TEST_CASE("tiny run writes its artifacts and is deterministic") {
  testutil::TempDir dir;
  const auto cfg = resolve_config(tiny_config());
  const auto a = run_experiment(cfg, dir / "a");
  for (const char* f : {"model.abn3", "train_report.tsv", "abx_within.tsv", "abx_across.tsv",
                        "abx_within_baseline.tsv", "abx_across_baseline.tsv", "summary.tsv",
                        "run.json"})
    CHECK(std::filesystem::exists(dir / "a" / f));
  REQUIRE(a.find(AbxMode::across));
  CHECK(a.find(AbxMode::across)->embedded_error >= 0.0);
  CHECK(a.find(AbxMode::across)->embedded_error <= 1.0);
  CHECK(a.report.epochs.size() == 2);

  const auto back = read_summary_tsv(dir / "a" / "summary.tsv");
  CHECK(back.collapsed == a.collapsed);
  REQUIRE(back.find(AbxMode::within));
  CHECK(back.find(AbxMode::within)->baseline_error ==
        doctest::Approx(a.find(AbxMode::within)->baseline_error).epsilon(1e-12));
  CHECK(back.report.best_epoch == a.report.best_epoch);

  std::ifstream manifest(dir / "a" / "run.json");
  const auto j = nlohmann::json::parse(manifest);
  CHECK(j.at("config").at("sampler.phi") == "one");
  CHECK(read_config(dir / "a" / "run.json") == to_config_map(cfg));

  run_experiment(cfg, dir / "b");
  for (const char* f : {"train_report.tsv", "abx_within.tsv", "abx_across.tsv", "summary.tsv",
                        "run.json"})
    CHECK(testutil::read_file(dir / "a" / f) == testutil::read_file(dir / "b" / f));
  CHECK(testutil::read_file(dir / "a" / "model.abn3") ==
        testutil::read_file(dir / "b" / "model.abn3"));
}

TEST_CASE("prepare_data splits") {
  auto m = tiny_config();
  m["abx.holdout"] = "0.25";
  auto d = prepare_data(resolve_config(m));
  CHECK(d.train_corpus.tokens.size() + d.eval_corpus.tokens.size() == d.corpus.tokens.size());
  for (const auto& u : d.eval_corpus.utterances)
    CHECK(d.train_corpus.find_utterance(u.file_id) == nullptr);
  CHECK(d.stacked.dim == 18);
  CHECK(d.raw.dim == 6);

  m["abx.holdout"] = "0";
  d = prepare_data(resolve_config(m));
  CHECK(d.eval_corpus.tokens.size() == d.corpus.tokens.size());

  m["corpus.fraction"] = "0.5";
  d = prepare_data(resolve_config(m));
  CHECK(d.train_corpus.total_vad_duration() < d.corpus.total_vad_duration());
}

TEST_CASE("run errors") {
  testutil::TempDir dir;
  auto m = tiny_config();
  m["network.layer_dims"] = "20,12,8";
  CHECK_THROWS_AS(run_experiment(resolve_config(m), dir / "x"), InputError);
}

TEST_CASE("phi sweep gives one row per value and seed") {
  testutil::TempDir dir;
  auto base = tiny_config();
  base["train.max_epochs"] = "1";
  base["abx.modes"] = "across";
  SweepSpec spec{"phi", {"raw", "sqrt2", "cbrt", "log1p", "one"}, {3}};
  const auto rows = run_sweep(base, spec, dir.path(), 2);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].value == spec.values[i]);
    CHECK(rows[i].status == "ok");
    CHECK(std::isfinite(rows[i].across_error));
    CHECK(std::isnan(rows[i].within_error));
  }
  const auto back = read_sweep_tsv(dir / "sweep.tsv");
  REQUIRE(back.size() == 5);
  CHECK(back[2].value == "cbrt");
  CHECK(back[2].across_error == doctest::Approx(rows[2].across_error).epsilon(1e-12));
  CHECK(testutil::read_file(dir / "sweep.svg").find("<svg") != std::string::npos);

  // a bad value fails its own row only
  SweepSpec bad{"p_diff_word", {"0.5", "2"}, {1}};
  const auto mixed = run_sweep(base, bad, dir / "bad", 1);
  REQUIRE(mixed.size() == 2);
  CHECK(mixed[0].status == "ok");
  CHECK(mixed[1].status.rfind("failed", 0) == 0);

  CHECK_THROWS_AS(validate(SweepSpec{"gamma", {"1"}, {1}}), InputError);
  CHECK_THROWS_AS(validate(SweepSpec{"phi", {}, {1}}), InputError);
  CHECK(sweep_axis_key("fraction") == "corpus.fraction");
}

TEST_CASE("sweep over p_diff_word in {0, 0.5, 1}") {
  testutil::TempDir dir;
  auto base = tiny_config();
  base["train.max_epochs"] = "1";
  base["abx.modes"] = "across";
  const auto rows = run_sweep(base, SweepSpec{"p_diff_word", {"0", "0.5", "1"}, {2}}, dir.path());
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(r.status == "ok");
}
