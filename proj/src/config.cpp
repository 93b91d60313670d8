// src/config.cpp
#include "wsp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "wsp/error.hpp"

namespace wsp {

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::weak_only: return "weak_only";
    case Regime::wsp_ft: return "wsp_ft";
    case Regime::direct_ft: return "direct_ft";
    case Regime::self_training: return "self_training";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::weak_only, Regime::wsp_ft, Regime::direct_ft, Regime::self_training}) {
    if (name == to_string(r)) return r;
  }
  throw Error(Errc::usage, "unknown regime '" + std::string(name) + "'");
}

const char* to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::greedy: return "greedy";
    case DecodeMode::lm: return "lm";
    case DecodeMode::both: return "both";
  }
  return "unknown";
}

DecodeMode parse_decode_mode(std::string_view name) {
  for (DecodeMode m : {DecodeMode::greedy, DecodeMode::lm, DecodeMode::both}) {
    if (name == to_string(m)) return m;
  }
  throw Error(Errc::usage, "unknown decode mode '" + std::string(name) + "'");
}

acoustic::TrainConfig WorkbenchConfig::default_finetune() {
  acoustic::TrainConfig c;
  c.lr = 1e-4;
  c.max_epochs = 10;
  return c;
}

void WorkbenchConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::usage, "config: " + what);
  };
  require(data.train_utts >= 1 && data.dev_utts >= 0 && data.test_utts >= 1, "corpus sizes");
  require(data.vocab_size >= 1, "data.vocab_size must be >= 1");
  require(data.len_min >= 1 && data.len_min <= data.len_max, "data.len_min/len_max");
  require(data.voice.dim >= 1, "data.voice.dim must be >= 1");
  require(data.voice.dur_min >= 1 && data.voice.dur_min <= data.voice.dur_max, "data.voice durations");
  require(data.voice.noise_sigma >= 0 && data.voice.channel_sigma >= 0, "data.voice sigmas must be >= 0");
  require(model.context >= 0 && model.hidden >= 1, "model shape");
  require(model.dim == data.voice.dim, "model.dim must equal data.voice.dim");
  require(lm.order >= 1 && lm.k > 0, "lm order/k");
  require(experiment.clean_subset_size >= 0, "experiment.clean_subset_size must be >= 0");
  require(experiment.self_training_pool >= 0 && experiment.self_training_pool <= 1,
          "experiment.self_training_pool must be in [0, 1]");
  require(experiment.teacher == Regime::direct_ft || experiment.teacher == Regime::wsp_ft,
          "experiment.teacher must be direct_ft or wsp_ft");
  require(experiment.teacher_fraction >= 0 && experiment.teacher_fraction <= 1, "experiment.teacher_fraction");
  for (double f : sweep.fractions) require(f >= 0 && f <= 1, "sweep fractions must be in [0, 1]");
  require(!sweep.seeds.empty(), "sweep.seeds must not be empty");
  corruption.validate();
  pretrain.validate();
  finetune.validate();
  decoder.validate();
}

namespace {

// Reads keys from one mapping and rejects any it did not consume.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw Error(Errc::parse, path_ + " must be a mapping");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!node_ || !node_.IsMap() || !node_[key]) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception& e) {
      throw Error(Errc::parse, path_ + "." + key + ": " + e.what());
    }
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    return Section(node_ && node_.IsMap() ? node_[key] : YAML::Node(), path_.empty() ? key : path_ + "." + key);
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw Error(Errc::parse, "unknown config key '" + (path_.empty() ? key : path_ + "." + key) + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

void read_train(Section s, acoustic::TrainConfig& c) {
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("beta1", c.beta1);
  s.get("beta2", c.beta2);
  s.get("eps", c.eps);
  s.get("grad_clip_norm", c.grad_clip_norm);
  s.get("max_epochs", c.max_epochs);
  s.get("patience", c.patience);
  s.get("min_epoch_steps", c.min_epoch_steps);
  s.finish();
}

void emit_train(YAML::Emitter& e, const acoustic::TrainConfig& c) {
  e << YAML::BeginMap;
  e << YAML::Key << "batch_size" << YAML::Value << c.batch_size;
  e << YAML::Key << "lr" << YAML::Value << c.lr;
  e << YAML::Key << "beta1" << YAML::Value << c.beta1;
  e << YAML::Key << "beta2" << YAML::Value << c.beta2;
  e << YAML::Key << "eps" << YAML::Value << c.eps;
  e << YAML::Key << "grad_clip_norm" << YAML::Value << c.grad_clip_norm;
  e << YAML::Key << "max_epochs" << YAML::Value << c.max_epochs;
  e << YAML::Key << "patience" << YAML::Value << c.patience;
  e << YAML::Key << "min_epoch_steps" << YAML::Value << c.min_epoch_steps;
  e << YAML::EndMap;
}

// Enum names inside a config file are a parse error, not a usage error.
template <typename Parse>
auto in_config(Parse parse, const std::string& value) {
  try {
    return parse(value);
  } catch (const Error& e) {
    throw Error(Errc::parse, e.what());
  }
}

template <typename T, typename Parse>
void get_list(Section& s, const std::string& key, std::vector<T>& out, Parse parse) {
  std::vector<std::string> raw;
  s.get(key, raw);
  if (raw.empty()) return;
  out.clear();
  for (const auto& r : raw) out.push_back(in_config(parse, r));
}

}  // namespace

WorkbenchConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::parse, std::string("config: ") + e.what());
  }
  WorkbenchConfig cfg;
  Section top(root, "");

  {
    Section d = top.sub("data");
    d.get("dir", cfg.data.dir);
    d.get("seed", cfg.data.seed);
    d.get("train_utts", cfg.data.train_utts);
    d.get("dev_utts", cfg.data.dev_utts);
    d.get("test_utts", cfg.data.test_utts);
    d.get("vocab_size", cfg.data.vocab_size);
    d.get("vocab_seed", cfg.data.vocab_seed);
    d.get("vocab_file", cfg.data.vocab_file);
    d.get("len_min", cfg.data.len_min);
    d.get("len_max", cfg.data.len_max);
    d.get("voice_seed", cfg.data.voice_seed);
    if (d.has("clean_voice_seed")) {
      std::uint64_t v = 0;
      d.get("clean_voice_seed", v);
      cfg.data.clean_voice_seed = v;
    }
    Section v = d.sub("voice");
    v.get("dim", cfg.data.voice.dim);
    v.get("noise_sigma", cfg.data.voice.noise_sigma);
    v.get("dur_min", cfg.data.voice.dur_min);
    v.get("dur_max", cfg.data.voice.dur_max);
    v.get("channel_sigma", cfg.data.voice.channel_sigma);
    v.get("crossfade", cfg.data.voice.crossfade);
    v.finish();
    d.finish();
  }
  {
    Section c = top.sub("corruption");
    std::string mode = corruptor::to_string(cfg.corruption.mode);
    c.get("mode", mode);
    cfg.corruption.mode = in_config(corruptor::parse_mode, mode);
    c.get("p_delete", cfg.corruption.p_delete);
    c.get("p_substitute", cfg.corruption.p_substitute);
    c.get("p_repeat", cfg.corruption.p_repeat);
    c.get("p_timestamp", cfg.corruption.p_timestamp);
    c.get("edge_words_min", cfg.corruption.edge_words_min);
    c.get("edge_words_max", cfg.corruption.edge_words_max);
    c.get("substitute_soundalike_ratio", cfg.corruption.substitute_soundalike_ratio);
    c.finish();
  }
  {
    Section m = top.sub("model");
    m.get("context", cfg.model.context);
    m.get("hidden", cfg.model.hidden);
    m.finish();
    cfg.model.dim = cfg.data.voice.dim;
  }
  read_train(top.sub("pretrain"), cfg.pretrain);
  read_train(top.sub("finetune"), cfg.finetune);
  {
    Section l = top.sub("lm");
    l.get("order", cfg.lm.order);
    l.get("k", cfg.lm.k);
    l.finish();
  }
  {
    Section d = top.sub("decoder");
    d.get("beam_width", cfg.decoder.beam_width);
    d.get("lm_weight", cfg.decoder.lm_weight);
    d.get("insertion_bonus", cfg.decoder.insertion_bonus);
    d.get("prune_logp", cfg.decoder.prune_logp);
    d.finish();
  }
  {
    Section x = top.sub("experiment");
    auto& e = cfg.experiment;
    x.get("clean_subset_size", e.clean_subset_size);
    x.get("self_training_pool", e.self_training_pool);
    std::string teacher = to_string(e.teacher);
    x.get("teacher", teacher);
    e.teacher = in_config(parse_regime, teacher);
    x.get("pseudo_label_with_lm", e.pseudo_label_with_lm);
    x.get("nonconverged_wer", e.nonconverged_wer);
    std::string decode = to_string(e.decode);
    x.get("decode", decode);
    e.decode = in_config(parse_decode_mode, decode);
    std::string tmode = corruptor::to_string(e.teacher_mode);
    x.get("teacher_mode", tmode);
    e.teacher_mode = in_config(corruptor::parse_mode, tmode);
    x.get("teacher_fraction", e.teacher_fraction);
    x.finish();
  }
  {
    Section s = top.sub("sweep");
    get_list(s, "regimes", cfg.sweep.regimes, [](const std::string& v) { return parse_regime(v); });
    get_list(s, "modes", cfg.sweep.modes, [](const std::string& v) { return corruptor::parse_mode(v); });
    s.get("fractions", cfg.sweep.fractions);
    s.get("seeds", cfg.sweep.seeds);
    s.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

WorkbenchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const WorkbenchConfig& cfg) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;

  e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dir" << YAML::Value << cfg.data.dir;
  e << YAML::Key << "seed" << YAML::Value << cfg.data.seed;
  e << YAML::Key << "train_utts" << YAML::Value << cfg.data.train_utts;
  e << YAML::Key << "dev_utts" << YAML::Value << cfg.data.dev_utts;
  e << YAML::Key << "test_utts" << YAML::Value << cfg.data.test_utts;
  e << YAML::Key << "vocab_size" << YAML::Value << cfg.data.vocab_size;
  e << YAML::Key << "vocab_seed" << YAML::Value << cfg.data.vocab_seed;
  e << YAML::Key << "vocab_file" << YAML::Value << cfg.data.vocab_file;
  e << YAML::Key << "len_min" << YAML::Value << cfg.data.len_min;
  e << YAML::Key << "len_max" << YAML::Value << cfg.data.len_max;
  e << YAML::Key << "voice_seed" << YAML::Value << cfg.data.voice_seed;
  if (cfg.data.clean_voice_seed) e << YAML::Key << "clean_voice_seed" << YAML::Value << *cfg.data.clean_voice_seed;
  e << YAML::Key << "voice" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dim" << YAML::Value << cfg.data.voice.dim;
  e << YAML::Key << "noise_sigma" << YAML::Value << cfg.data.voice.noise_sigma;
  e << YAML::Key << "dur_min" << YAML::Value << cfg.data.voice.dur_min;
  e << YAML::Key << "dur_max" << YAML::Value << cfg.data.voice.dur_max;
  e << YAML::Key << "channel_sigma" << YAML::Value << cfg.data.voice.channel_sigma;
  e << YAML::Key << "crossfade" << YAML::Value << cfg.data.voice.crossfade;
  e << YAML::EndMap << YAML::EndMap;

  const auto& c = cfg.corruption;
  e << YAML::Key << "corruption" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "mode" << YAML::Value << corruptor::to_string(c.mode);
  e << YAML::Key << "p_delete" << YAML::Value << c.p_delete;
  e << YAML::Key << "p_substitute" << YAML::Value << c.p_substitute;
  e << YAML::Key << "p_repeat" << YAML::Value << c.p_repeat;
  e << YAML::Key << "p_timestamp" << YAML::Value << c.p_timestamp;
  e << YAML::Key << "edge_words_min" << YAML::Value << c.edge_words_min;
  e << YAML::Key << "edge_words_max" << YAML::Value << c.edge_words_max;
  e << YAML::Key << "substitute_soundalike_ratio" << YAML::Value << c.substitute_soundalike_ratio;
  e << YAML::EndMap;

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "context" << YAML::Value << cfg.model.context;
  e << YAML::Key << "hidden" << YAML::Value << cfg.model.hidden;
  e << YAML::EndMap;

  e << YAML::Key << "pretrain" << YAML::Value;
  emit_train(e, cfg.pretrain);
  e << YAML::Key << "finetune" << YAML::Value;
  emit_train(e, cfg.finetune);

  e << YAML::Key << "lm" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "order" << YAML::Value << cfg.lm.order;
  e << YAML::Key << "k" << YAML::Value << cfg.lm.k;
  e << YAML::EndMap;

  e << YAML::Key << "decoder" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "beam_width" << YAML::Value << cfg.decoder.beam_width;
  e << YAML::Key << "lm_weight" << YAML::Value << cfg.decoder.lm_weight;
  e << YAML::Key << "insertion_bonus" << YAML::Value << cfg.decoder.insertion_bonus;
  e << YAML::Key << "prune_logp" << YAML::Value << cfg.decoder.prune_logp;
  e << YAML::EndMap;

  const auto& x = cfg.experiment;
  e << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "clean_subset_size" << YAML::Value << x.clean_subset_size;
  e << YAML::Key << "self_training_pool" << YAML::Value << x.self_training_pool;
  e << YAML::Key << "teacher" << YAML::Value << to_string(x.teacher);
  e << YAML::Key << "pseudo_label_with_lm" << YAML::Value << x.pseudo_label_with_lm;
  e << YAML::Key << "nonconverged_wer" << YAML::Value << x.nonconverged_wer;
  e << YAML::Key << "decode" << YAML::Value << to_string(x.decode);
  e << YAML::Key << "teacher_mode" << YAML::Value << corruptor::to_string(x.teacher_mode);
  e << YAML::Key << "teacher_fraction" << YAML::Value << x.teacher_fraction;
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "regimes" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Regime r : cfg.sweep.regimes) e << to_string(r);
  e << YAML::EndSeq;
  e << YAML::Key << "modes" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto m : cfg.sweep.modes) e << corruptor::to_string(m);
  e << YAML::EndSeq;
  e << YAML::Key << "fractions" << YAML::Value << YAML::Flow << cfg.sweep.fractions;
  e << YAML::Key << "seeds" << YAML::Value << YAML::Flow << cfg.sweep.seeds;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace wsp
