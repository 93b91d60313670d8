// src/synth.cpp
#include "wsp/synth.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "wsp/charset.hpp"
#include "wsp/error.hpp"
#include "wsp/feature_io.hpp"
#include "wsp/textkit.hpp"

namespace wsp::synth {

namespace {

double min_pairwise_distance(const Eigen::MatrixXd& protos) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < protos.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < protos.rows(); ++j) {
      best = std::min(best, (protos.row(i) - protos.row(j)).norm());
    }
  }
  return best;
}

}  // namespace

VoiceProfile make_voice(std::uint64_t seed, const VoiceParams& params) {
  if (params.dim < 1) throw Error(Errc::usage, "voice dim must be >= 1");
  if (params.dur_min < 1 || params.dur_max < params.dur_min) {
    throw Error(Errc::usage, "voice durations must satisfy 1 <= dur_min <= dur_max");
  }
  if (params.noise_sigma < 0 || params.channel_sigma < 0) throw Error(Errc::usage, "voice sigmas must be >= 0");

  VoiceProfile voice;
  voice.dim = params.dim;
  voice.noise_sigma = params.noise_sigma;
  voice.dur_min = params.dur_min;
  voice.dur_max = params.dur_max;
  voice.channel_sigma = params.channel_sigma;
  voice.crossfade = params.crossfade;
  voice.seed = seed;

  Rng rng = keyed_stream(seed, "voice-prototypes");
  std::normal_distribution<double> normal(0.0, 1.0);
  voice.prototypes.resize(charset::kSize, params.dim);
  for (int attempt = 0;; ++attempt) {
    for (Eigen::Index i = 0; i < voice.prototypes.size(); ++i) voice.prototypes.data()[i] = normal(rng);
    if (attempt >= 100 || min_pairwise_distance(voice.prototypes) >= 6.0 * params.noise_sigma) break;
  }
  return voice;
}

Vocabulary make_pseudo_vocabulary(int size, std::uint64_t seed) {
  if (size < 1) throw Error(Errc::empty_vocab, "vocabulary size must be >= 1");
  static constexpr std::array<const char*, 24> kOnsets = {
      "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p",
      "r", "s", "t", "v", "w", "z", "ch", "sh", "th", "st", "tr", "br"};
  static constexpr std::array<const char*, 9> kNuclei = {"a", "e", "i", "o", "u", "ea", "ou", "ai", "y"};
  static constexpr std::array<const char*, 9> kCodas = {"", "", "n", "r", "s", "t", "l", "nd", "ck"};

  Rng rng = keyed_stream(seed, "pseudo-vocabulary");
  auto pick = [&rng](const auto& table) {
    return std::string(table[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(table.size()) - 1))]);
  };
  Vocabulary vocab;
  std::set<std::string> seen;
  while (static_cast<int>(vocab.words.size()) < size) {
    int syllables = uniform_int(rng, 1, 2);
    std::string word;
    if (bernoulli(rng, 0.15)) word += pick(kNuclei);
    for (int s = 0; s < syllables; ++s) {
      word += pick(kOnsets);
      word += pick(kNuclei);
      if (s + 1 == syllables || bernoulli(rng, 0.3)) word += pick(kCodas);
    }
    if (word.size() < 2 || !seen.insert(word).second) continue;
    vocab.words.push_back(word);
  }
  for (int r = 0; r < size; ++r) vocab.weights.push_back(1.0 / (r + 1.0));
  return vocab;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open vocabulary file " + path.string());
  Vocabulary vocab;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    TokenSeq toks = textkit::normalize(line);
    if (toks.empty()) continue;
    if (toks.size() != 1 || toks[0] != line) {
      throw Error(Errc::invalid_charset, path.string() + ": vocabulary line is not a single lowercase word: '" + line + "'");
    }
    if (!charset::is_valid(toks[0])) throw Error(Errc::invalid_charset, path.string() + ": '" + line + "'");
    if (seen.insert(toks[0]).second) {
      vocab.words.push_back(toks[0]);
      vocab.weights.push_back(1.0);
    }
  }
  if (vocab.words.empty()) throw Error(Errc::empty_vocab, path.string() + " has no words");
  return vocab;
}

TokenSeq sample_sentence(const Vocabulary& vocab, int len_min, int len_max, Rng& rng) {
  if (vocab.words.empty()) throw Error(Errc::empty_vocab, "cannot sample from an empty vocabulary");
  if (len_min < 1 || len_max < len_min) throw Error(Errc::usage, "sentence length bounds must satisfy 1 <= min <= max");
  std::discrete_distribution<std::size_t> pick(vocab.weights.begin(), vocab.weights.end());
  const int len = uniform_int(rng, len_min, len_max);
  TokenSeq out;
  out.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) out.push_back(vocab.words[pick(rng)]);
  return out;
}

Rendered render_features(const TokenSeq& text, const VoiceProfile& voice, Rng& rng) {
  Rendered out;
  out.text = textkit::join(text);
  if (out.text.empty()) throw Error(Errc::invalid_charset, "cannot render an empty transcript");
  std::vector<int> symbols;
  for (char c : out.text) {
    auto idx = charset::index_of(c);
    if (!idx) throw Error(Errc::invalid_charset, "cannot render '" + out.text + "'");
    symbols.push_back(*idx);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::RowVectorXd channel(voice.dim);
  for (int d = 0; d < voice.dim; ++d) channel[d] = voice.channel_sigma * normal(rng);

  out.durations.reserve(symbols.size());
  long total = 0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    out.durations.push_back(uniform_int(rng, voice.dur_min, voice.dur_max));
    total += out.durations.back();
  }

  Eigen::MatrixXd frames(total, voice.dim);
  long t = 0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    for (int k = 0; k < out.durations[i]; ++k, ++t) {
      for (int d = 0; d < voice.dim; ++d) {
        frames(t, d) = voice.prototypes(symbols[i], d) + voice.noise_sigma * normal(rng) + channel[d];
      }
      if (voice.crossfade && k == 0 && t > 0) frames.row(t) = 0.5 * (frames.row(t) + frames.row(t - 1));
    }
  }
  out.features.frames = frames.cast<float>();
  out.features.gold = text;
  return out;
}

std::vector<int> classify_frames(const FrameMatrix& frames, const VoiceProfile& voice) {
  std::vector<int> labels(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    Eigen::RowVectorXd f = frames.row(t).cast<double>();
    Eigen::Index best = 0;
    (voice.prototypes.rowwise() - f).rowwise().squaredNorm().minCoeff(&best);
    labels[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return labels;
}

std::string utterance_id(const CorpusSpec& spec, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return spec.id_prefix + "-" + buf;
}

Rendered generate_utterance(const CorpusSpec& spec, int index) {
  const std::string id = utterance_id(spec, index);
  Rng rng = keyed_stream(spec.seed, id);
  TokenSeq sentence = sample_sentence(spec.vocab, spec.len_min, spec.len_max, rng);
  Rendered r = render_features(sentence, spec.voice, rng);
  r.features.utterance_id = id;
  return r;
}

std::vector<ManifestRow> generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.n_utts < 1) throw Error(Errc::usage, "n_utts must be >= 1");
  std::filesystem::create_directories(out_dir / "feats");
  std::vector<ManifestRow> rows;
  rows.reserve(static_cast<std::size_t>(spec.n_utts));
  for (int i = 0; i < spec.n_utts; ++i) {
    Rendered r = generate_utterance(spec, i);
    ManifestRow row;
    row.id = r.features.utterance_id;
    row.audio_path = "feats/" + row.id + ".wspf";
    row.text = textkit::join(r.features.gold);
    row.start_s = 0.0;
    row.end_s = static_cast<double>(r.features.num_frames()) * kFrameShiftSeconds;
    write_features(out_dir / row.audio_path, r.features.frames);
    rows.push_back(std::move(row));
  }
  write_manifest(out_dir / "manifest.jsonl", rows);
  return rows;
}

}  // namespace wsp::synth
