// wsp/config.hpp
//
// Workbench configuration, loaded from YAML. Every section is optional;
// missing keys keep their defaults, unknown keys are rejected.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wsp/corruptor.hpp"
#include "wsp/decode.hpp"
#include "wsp/model.hpp"
#include "wsp/synth.hpp"
#include "wsp/trainer.hpp"

namespace wsp {

enum class Regime { weak_only, wsp_ft, direct_ft, self_training };
const char* to_string(Regime regime);
Regime parse_regime(std::string_view name);

enum class DecodeMode { greedy, lm, both };
const char* to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view name);

struct DataConfig {
  // When set, corpora are read from <dir>/{train,dev,test}/manifest.jsonl
  // instead of being synthesized.
  std::string dir;
  std::uint64_t seed = 1;
  int train_utts = 2000;
  int dev_utts = 200;
  int test_utts = 200;
  int vocab_size = 400;
  std::uint64_t vocab_seed = 11;
  std::string vocab_file;
  int len_min = 7;
  int len_max = 13;
  std::uint64_t voice_seed = 7;
  synth::VoiceParams voice;
  // Voice for the clean fine-tuning subset; unset means the training voice.
  std::optional<std::uint64_t> clean_voice_seed;
};

struct LmConfig {
  int order = 4;
  double k = 0.1;
};

struct ExperimentConfig {
  int clean_subset_size = 50;
  double self_training_pool = 0.4;  // share of the non-subset training audio
  Regime teacher = Regime::direct_ft;
  bool pseudo_label_with_lm = true;
  double nonconverged_wer = 0.95;
  DecodeMode decode = DecodeMode::both;
  // Weak-only cell a wsp_ft teacher or baseline refers to when the regime
  // itself carries no corruption setting.
  corruptor::Mode teacher_mode = corruptor::Mode::random;
  double teacher_fraction = 1.0;
};

struct SweepConfig {
  std::vector<Regime> regimes{Regime::weak_only};
  std::vector<corruptor::Mode> modes{corruptor::Mode::random, corruptor::Mode::full};
  std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct WorkbenchConfig {
  DataConfig data;
  corruptor::CorruptionConfig corruption;
  acoustic::ModelShape model;
  acoustic::TrainConfig pretrain;
  acoustic::TrainConfig finetune = default_finetune();
  LmConfig lm;
  decode::DecoderConfig decoder;
  ExperimentConfig experiment;
  SweepConfig sweep;

  static acoustic::TrainConfig default_finetune();
  void validate() const;
};

WorkbenchConfig load_config(const std::filesystem::path& path);
WorkbenchConfig parse_config(const std::string& yaml_text);
// Canonical YAML rendering; load(dump(c)) == c.
std::string dump_config(const WorkbenchConfig& cfg);

}  // namespace wsp
