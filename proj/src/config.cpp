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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <set>
#include <sstream>

namespace pairsamp {

namespace pt = boost::property_tree;

ConfigMap parse_config_text(const std::string& text) {
  // The ini parser only knows ';' comments.
  std::ostringstream cleaned;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto t = detail::trim(line);
    cleaned << (!t.empty() && t.front() == '#' ? std::string() : line) << '\n';
  }
  pt::ptree tree;
  std::istringstream in(cleaned.str());
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigMap out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      out[section] = detail::trim(body.data());
      continue;
    }
    for (const auto& [key, value] : body)
      out[section + "." + key] = std::string(detail::trim(value.data()));
  }
  return out;
}

ConfigMap read_config(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::ostringstream text;
  text << in.rdbuf();
  if (path.extension() == ".json") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
    if (!doc.contains("config") || !doc["config"].is_object())
      throw InputError(path.string() + ": manifest has no \"config\" object");
    ConfigMap out;
    for (const auto& [key, value] : doc["config"].items()) {
      if (!value.is_string()) throw InputError(path.string() + ": config." + key + " is not a string");
      out[key] = value.get<std::string>();
    }
    return out;
  }
  try {
    return parse_config_text(text.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_config(const ConfigMap& config, const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [key, value] : config) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw InputError("config key without section: " + key);
    sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), value);
  }
  auto out = detail::open_output(path);
  bool first = true;
  for (const auto& [section, entries] : sections) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  }
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& f : detail::split_fields(text, ',')) {
    const auto t = detail::trim(f);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string_view to_string(CorpusSource s) {
  switch (s) {
    case CorpusSource::synth: return "synth";
    case CorpusSource::annotations: return "annotations";
    case CorpusSource::classes: return "classes";
  }
  return "synth";
}

std::string_view to_string(FrameDistance d) {
  return d == FrameDistance::cosine ? "cosine" : "euclidean";
}

// Typed lookups that remember which keys were consumed.
class Reader {
 public:
  explicit Reader(const ConfigMap& m) : m_(m) {}

  const std::string* find(const std::string& key) {
    used_.insert(key);
    const auto it = m_.find(key);
    return it == m_.end() ? nullptr : &it->second;
  }
  const std::string& require(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) throw InputError("config: missing required key '" + key + "'");
    return *v;
  }
  std::string str(const std::string& key, std::string fallback) {
    const auto* v = find(key);
    return v ? *v : fallback;
  }
  double num(const std::string& key, double fallback) {
    const auto* v = find(key);
    return v ? detail::parse_double(*v, "config key '" + key + "'") : fallback;
  }
  long integer(const std::string& key, long fallback) {
    const auto* v = find(key);
    return v ? detail::parse_long(*v, "config key '" + key + "'") : fallback;
  }
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const long v = integer(key, static_cast<long>(fallback));
    if (v < 0) throw InputError("config key '" + key + "': seed must be >= 0");
    return static_cast<std::uint64_t>(v);
  }
  bool flag(const std::string& key, bool fallback) {
    const auto* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw InputError("config key '" + key + "': expected true or false, got '" + *v + "'");
  }
  void reject_unknown() const {
    for (const auto& [key, value] : m_)
      if (!used_.count(key) && key.rfind("sweep.", 0) != 0)
        throw InputError("config: unknown key '" + key + "'");
  }

 private:
  const ConfigMap& m_;
  std::set<std::string> used_;
};

template <typename F>
void with_key(const std::string& key, F&& f) {
  try {
    f();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.find(key) != std::string::npos) throw;
    throw InputError("config key '" + key + "': " + msg);
  }
}

}  // namespace

ExperimentConfig resolve_config(const ConfigMap& config) {
  Reader r(config);
  ExperimentConfig cfg;

  const auto source = r.str("corpus.source", "synth");
  if (source == "synth")
    cfg.source = CorpusSource::synth;
  else if (source == "annotations")
    cfg.source = CorpusSource::annotations;
  else if (source == "classes")
    cfg.source = CorpusSource::classes;
  else
    throw InputError("config key 'corpus.source': expected synth, annotations or classes, got '" +
                     source + "'");
  cfg.word_file = r.str("corpus.word_file", "");
  cfg.vad_file = r.str("corpus.vad_file", "");
  cfg.phone_file = r.str("corpus.phone_file", "");
  cfg.class_file = r.str("corpus.class_file", "");
  cfg.archive_dir = r.str("corpus.archive", "");
  cfg.wav_dir = r.str("corpus.wav_dir", "");
  cfg.fraction = r.num("corpus.fraction", cfg.fraction);
  cfg.corpus_seed = r.seed("corpus.seed", cfg.corpus_seed);
  if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0))
    throw InputError("config key 'corpus.fraction': must be in (0, 1]");

  const auto need = [&](const std::filesystem::path& p, const char* key) {
    if (p.empty())
      throw InputError(std::string("config: missing required key '") + key + "' for corpus.source = " +
                       source);
  };
  if (cfg.source != CorpusSource::synth) {
    need(cfg.vad_file, "corpus.vad_file");
    need(cfg.phone_file, "corpus.phone_file");
    if (cfg.source == CorpusSource::annotations) need(cfg.word_file, "corpus.word_file");
    if (cfg.source == CorpusSource::classes) need(cfg.class_file, "corpus.class_file");
    if (cfg.archive_dir.empty() && cfg.wav_dir.empty())
      throw InputError("config: one of 'corpus.archive' or 'corpus.wav_dir' is required");
  }

  auto& s = cfg.synth;
  s.vocab_size = static_cast<int>(r.integer("synth.vocab_size", s.vocab_size));
  s.zipf_alpha = r.num("synth.zipf_alpha", s.zipf_alpha);
  s.phone_inventory_size =
      static_cast<int>(r.integer("synth.phone_inventory_size", s.phone_inventory_size));
  s.word_len_range.first = static_cast<int>(r.integer("synth.word_len_min", s.word_len_range.first));
  s.word_len_range.second =
      static_cast<int>(r.integer("synth.word_len_max", s.word_len_range.second));
  s.n_speakers = static_cast<int>(r.integer("synth.n_speakers", s.n_speakers));
  s.tokens_total = static_cast<int>(r.integer("synth.tokens_total", s.tokens_total));
  s.frames_per_phone.first =
      static_cast<int>(r.integer("synth.frames_per_phone_min", s.frames_per_phone.first));
  s.frames_per_phone.second =
      static_cast<int>(r.integer("synth.frames_per_phone_max", s.frames_per_phone.second));
  s.feature_dim = static_cast<int>(r.integer("synth.feature_dim", s.feature_dim));
  s.speaker_shift_scale = r.num("synth.speaker_shift_scale", s.speaker_shift_scale);
  s.noise_scale = r.num("synth.noise_scale", s.noise_scale);
  s.tokens_per_utterance =
      static_cast<int>(r.integer("synth.tokens_per_utterance", s.tokens_per_utterance));
  s.prototype_scale = r.num("synth.prototype_scale", s.prototype_scale);
  s.phone_subspace_dim =
      static_cast<int>(r.integer("synth.phone_subspace_dim", s.phone_subspace_dim));
  with_key("synth", [&] { validate(s); });

  auto& fb = cfg.fbank;
  cfg.normalize = r.flag("features.normalize", cfg.normalize);
  cfg.stack_width = static_cast<int>(r.integer("features.stack_width", cfg.stack_width));
  if (cfg.stack_width < 1 || cfg.stack_width % 2 == 0)
    throw InputError("config key 'features.stack_width': must be a positive odd number");
  fb.sample_rate = r.num("features.sample_rate", fb.sample_rate);
  fb.window_len = r.num("features.window_len", fb.window_len);
  fb.hop = r.num("features.hop", fb.hop);
  fb.n_mels = static_cast<int>(r.integer("features.n_mels", fb.n_mels));
  fb.energy_floor = r.num("features.energy_floor", fb.energy_floor);
  with_key("features", [&] { validate(fb); });

  auto& sp = cfg.sampler;
  with_key("sampler.phi", [&] { sp.phi = parse_phi(r.require("sampler.phi")); });
  sp.p_diff_word =
      detail::parse_double(r.require("sampler.p_diff_word"), "config key 'sampler.p_diff_word'");
  sp.p_diff_speaker = detail::parse_double(r.require("sampler.p_diff_speaker"),
                                           "config key 'sampler.p_diff_speaker'");
  sp.pairs_per_epoch = static_cast<int>(r.integer("sampler.pairs_per_epoch", sp.pairs_per_epoch));
  sp.allow_same_token = r.flag("sampler.allow_same_token", sp.allow_same_token);
  sp.seed = r.seed("sampler.seed", sp.seed);
  with_key("sampler", [&] { validate(sp); });

  auto& net = cfg.net;
  if (const auto* dims = r.find("network.layer_dims")) {
    net.layer_dims.clear();
    for (const auto& d : split_list(*dims))
      net.layer_dims.push_back(static_cast<int>(detail::parse_long(d, "config key 'network.layer_dims'")));
  }
  net.margin = r.num("network.margin", net.margin);
  net.batchnorm = r.flag("network.batchnorm", net.batchnorm);
  net.bn_momentum = r.num("network.bn_momentum", net.bn_momentum);
  net.bn_eps = r.num("network.bn_eps", net.bn_eps);
  with_key("network", [&] { validate(net); });

  auto& tr = cfg.train;
  tr.learning_rate = r.num("train.learning_rate", tr.learning_rate);
  tr.adam_beta1 = r.num("train.adam_beta1", tr.adam_beta1);
  tr.adam_beta2 = r.num("train.adam_beta2", tr.adam_beta2);
  tr.adam_eps = r.num("train.adam_eps", tr.adam_eps);
  tr.batch_frames = static_cast<int>(r.integer("train.batch_frames", tr.batch_frames));
  tr.max_epochs = static_cast<int>(r.integer("train.max_epochs", tr.max_epochs));
  tr.patience = static_cast<int>(r.integer("train.patience", tr.patience));
  tr.seed = r.seed("train.seed", tr.seed);
  cfg.valid_ratio = r.num("train.valid_ratio", cfg.valid_ratio);
  if (!(cfg.valid_ratio > 0.0 && cfg.valid_ratio < 1.0))
    throw InputError("config key 'train.valid_ratio': must be in (0, 1)");
  with_key("train", [&] { validate(tr); });

  if (const auto* modes = r.find("abx.modes")) {
    cfg.abx_modes.clear();
    for (const auto& m : split_list(*modes))
      with_key("abx.modes", [&] { cfg.abx_modes.push_back(parse_abx_mode(m)); });
    if (cfg.abx_modes.empty()) throw InputError("config key 'abx.modes': empty list");
  }
  cfg.abx_holdout = r.num("abx.holdout", cfg.abx_holdout);
  if (!(cfg.abx_holdout >= 0.0 && cfg.abx_holdout < 1.0))
    throw InputError("config key 'abx.holdout': must be in [0, 1)");
  cfg.abx_max_items = static_cast<int>(r.integer("abx.max_items", cfg.abx_max_items));
  if (cfg.abx_max_items < 0) throw InputError("config key 'abx.max_items': must be >= 0");

  const auto dist = r.str("align.frame_distance", "cosine");
  if (dist == "cosine")
    cfg.dtw_distance = FrameDistance::cosine;
  else if (dist == "euclidean")
    cfg.dtw_distance = FrameDistance::euclidean;
  else
    throw InputError("config key 'align.frame_distance': expected cosine or euclidean, got '" +
                     dist + "'");

  r.reject_unknown();
  return cfg;
}

ConfigMap to_config_map(const ExperimentConfig& cfg) {
  using detail::format_double;
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const auto i = [](long v) { return std::to_string(v); };
  ConfigMap m;
  m["corpus.source"] = std::string(to_string(cfg.source));
  const auto path_key = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) m[key] = p.string();
  };
  path_key("corpus.word_file", cfg.word_file);
  path_key("corpus.vad_file", cfg.vad_file);
  path_key("corpus.phone_file", cfg.phone_file);
  path_key("corpus.class_file", cfg.class_file);
  path_key("corpus.archive", cfg.archive_dir);
  path_key("corpus.wav_dir", cfg.wav_dir);
  m["corpus.fraction"] = format_double(cfg.fraction);
  m["corpus.seed"] = std::to_string(cfg.corpus_seed);

  const auto& s = cfg.synth;
  m["synth.vocab_size"] = i(s.vocab_size);
  m["synth.zipf_alpha"] = format_double(s.zipf_alpha);
  m["synth.phone_inventory_size"] = i(s.phone_inventory_size);
  m["synth.word_len_min"] = i(s.word_len_range.first);
  m["synth.word_len_max"] = i(s.word_len_range.second);
  m["synth.n_speakers"] = i(s.n_speakers);
  m["synth.tokens_total"] = i(s.tokens_total);
  m["synth.frames_per_phone_min"] = i(s.frames_per_phone.first);
  m["synth.frames_per_phone_max"] = i(s.frames_per_phone.second);
  m["synth.feature_dim"] = i(s.feature_dim);
  m["synth.speaker_shift_scale"] = format_double(s.speaker_shift_scale);
  m["synth.noise_scale"] = format_double(s.noise_scale);
  m["synth.tokens_per_utterance"] = i(s.tokens_per_utterance);
  m["synth.prototype_scale"] = format_double(s.prototype_scale);
  m["synth.phone_subspace_dim"] = i(s.phone_subspace_dim);

  m["features.normalize"] = b(cfg.normalize);
  m["features.stack_width"] = i(cfg.stack_width);
  m["features.sample_rate"] = format_double(cfg.fbank.sample_rate);
  m["features.window_len"] = format_double(cfg.fbank.window_len);
  m["features.hop"] = format_double(cfg.fbank.hop);
  m["features.n_mels"] = i(cfg.fbank.n_mels);
  m["features.energy_floor"] = format_double(cfg.fbank.energy_floor);

  m["sampler.phi"] = std::string(to_string(cfg.sampler.phi));
  m["sampler.p_diff_word"] = format_double(cfg.sampler.p_diff_word);
  m["sampler.p_diff_speaker"] = format_double(cfg.sampler.p_diff_speaker);
  m["sampler.pairs_per_epoch"] = i(cfg.sampler.pairs_per_epoch);
  m["sampler.allow_same_token"] = b(cfg.sampler.allow_same_token);
  m["sampler.seed"] = std::to_string(cfg.sampler.seed);

  std::vector<std::string> dims;
  for (int d : cfg.net.layer_dims) dims.push_back(std::to_string(d));
  m["network.layer_dims"] = join(dims);
  m["network.margin"] = format_double(cfg.net.margin);
  m["network.batchnorm"] = b(cfg.net.batchnorm);
  m["network.bn_momentum"] = format_double(cfg.net.bn_momentum);
  m["network.bn_eps"] = format_double(cfg.net.bn_eps);

  m["train.learning_rate"] = format_double(cfg.train.learning_rate);
  m["train.adam_beta1"] = format_double(cfg.train.adam_beta1);
  m["train.adam_beta2"] = format_double(cfg.train.adam_beta2);
  m["train.adam_eps"] = format_double(cfg.train.adam_eps);
  m["train.batch_frames"] = i(cfg.train.batch_frames);
  m["train.max_epochs"] = i(cfg.train.max_epochs);
  m["train.patience"] = i(cfg.train.patience);
  m["train.seed"] = std::to_string(cfg.train.seed);
  m["train.valid_ratio"] = format_double(cfg.valid_ratio);

  std::vector<std::string> modes;
  for (auto mode : cfg.abx_modes) modes.emplace_back(to_string(mode));
  m["abx.modes"] = join(modes);
  m["abx.holdout"] = format_double(cfg.abx_holdout);
  m["abx.max_items"] = i(cfg.abx_max_items);

  m["align.frame_distance"] = std::string(to_string(cfg.dtw_distance));
  return m;
}

}  // namespace pairsamp
