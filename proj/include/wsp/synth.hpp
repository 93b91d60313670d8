// wsp/synth.hpp
//
// Synthetic paired corpora: sentences sampled from a weighted vocabulary and
// rendered into feature frames by a prototype-plus-noise emission model.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wsp/manifest.hpp"
#include "wsp/rng.hpp"
#include "wsp/utterance.hpp"

namespace wsp::synth {

using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Frame shift used to derive manifest time spans.
inline constexpr double kFrameShiftSeconds = 0.01;

struct FeatureSequence {
  FrameMatrix frames;  // T x dim
  std::string utterance_id;
  TokenSeq gold;

  long num_frames() const { return frames.rows(); }
  long dim() const { return frames.cols(); }
};

struct VoiceProfile {
  int dim = 16;
  Eigen::MatrixXd prototypes;  // 28 x dim, one row per charset symbol
  double noise_sigma = 0.3;
  int dur_min = 2;
  int dur_max = 5;
  double channel_sigma = 0.05;
  bool crossfade = false;
  std::uint64_t seed = 0;
};

struct VoiceParams {
  int dim = 16;
  double noise_sigma = 0.3;
  int dur_min = 2;
  int dur_max = 5;
  double channel_sigma = 0.05;
  bool crossfade = false;
};

// Draws prototypes from a seeded standard normal. If the closest pair of
// prototypes is nearer than 6 noise standard deviations the draw is
// repeated from the same stream.
VoiceProfile make_voice(std::uint64_t seed, const VoiceParams& params = {});

struct Vocabulary {
  std::vector<std::string> words;
  std::vector<double> weights;
};

// Pronounceable pseudo-words with Zipfian weights, deterministic in seed.
Vocabulary make_pseudo_vocabulary(int size, std::uint64_t seed);
// One lowercase word per line; uniform weights. Blank lines are ignored.
Vocabulary load_vocabulary(const std::filesystem::path& path);

TokenSeq sample_sentence(const Vocabulary& vocab, int len_min, int len_max, Rng& rng);

struct Rendered {
  FeatureSequence features;
  std::vector<int> durations;  // frames per character of the rendered string
  std::string text;            // the rendered character string
};

Rendered render_features(const TokenSeq& text, const VoiceProfile& voice, Rng& rng);

// Nearest-prototype label (charset index) for every frame.
std::vector<int> classify_frames(const FrameMatrix& frames, const VoiceProfile& voice);

struct CorpusSpec {
  int n_utts = 1;
  Vocabulary vocab;
  VoiceProfile voice;
  std::uint64_t seed = 0;
  int len_min = 7;
  int len_max = 13;
  std::string id_prefix = "utt";
};

std::string utterance_id(const CorpusSpec& spec, int index);

// Utterance `index` of the corpus; depends only on (spec, index).
Rendered generate_utterance(const CorpusSpec& spec, int index);

// Writes <out_dir>/manifest.jsonl and <out_dir>/feats/<id>.wspf.
std::vector<ManifestRow> generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

}  // namespace wsp::synth
