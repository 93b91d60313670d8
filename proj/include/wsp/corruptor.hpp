// wsp/corruptor.hpp
//
// Synthetic transcript corruption: word deletion, soundalike / spelled-like
// substitution, repetition, and edge (timestamp) corruption, in random and
// full modes, plus corpus-level interpolation with gold transcripts.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wsp/rng.hpp"
#include "wsp/utterance.hpp"

namespace wsp::corruptor {

enum class Mode { random, full };

const char* to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct CorruptionConfig {
  Mode mode = Mode::random;
  double p_delete = 0.05;
  double p_substitute = 0.20;  // ignored in full mode
  double p_repeat = 0.05;
  double p_timestamp = 0.50;
  int edge_words_min = 1;
  int edge_words_max = 3;
  double substitute_soundalike_ratio = 0.5;
  std::uint64_t seed = 0;
  // Random mode forces one substitution when the stochastic pass leaves the
  // utterance unchanged. Tests turn this off to get an identity transform.
  bool enforce_min_mistake = true;

  void validate() const;
};

// Soundex key: first letter uppercased plus three consonant-class digits.
// Throws invalid_charset for words without letters or with characters
// outside letters and apostrophe.
std::string phonetic_key(std::string_view word);

// Optimal string alignment distance (adjacent transpositions count as one).
int damerau_levenshtein(std::string_view a, std::string_view b);

enum class NeighborKind { soundalike, spelled_like };

class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(const std::vector<std::string>& vocab);

  const std::vector<std::string>& vocab() const { return vocab_; }
  bool contains(const std::string& word) const;
  const std::map<std::string, std::vector<std::string>>& phonetic_buckets() const { return buckets_; }

  std::vector<std::string> soundalikes(const std::string& word) const;
  std::vector<std::string> spelled_likes(const std::string& word) const;

 private:
  std::vector<std::string> vocab_;  // sorted, unique
  std::set<std::string> members_;
  std::map<std::string, std::vector<std::string>> buckets_;
  // (first letter, length) -> words, for edit-distance candidate lookup.
  std::map<std::pair<char, std::size_t>, std::vector<std::string>> by_prefix_length_;
};

// Rule-based misspellings: doubled letter, dropped letter, swapped adjacent
// letters, appended or removed final 'e' / 's'. Never contains `word`.
std::vector<std::string> mutations(const std::string& word);

// Requested kind first, then the other kind, then rule-based mutations.
// Never empty and never contains `word`.
std::vector<std::string> neighbors(const std::string& word, const NeighborIndex& index, NeighborKind kind);

// What the stochastic pass did to one utterance.
struct CorruptionTrace {
  std::size_t words = 0;           // input words
  std::size_t deleted = 0;
  std::size_t substituted = 0;     // per-word substitutions (excludes forced)
  std::size_t survivors = 0;       // words not deleted
  std::size_t repeated = 0;
  bool timestamp = false;
  bool forced_substitution = false;
  bool degenerate = false;         // utterance emptied, replaced by one word
};

Utterance corrupt_utterance(const Utterance& utt, const CorruptionConfig& cfg, const NeighborIndex& index, Rng& rng,
                            CorruptionTrace* trace = nullptr);

struct CorruptedCorpus {
  Corpus utterances;
  std::vector<bool> corrupted;  // parallel to utterances
};

// Corrupts exactly round(fraction * N) utterances, chosen by a seeded
// permutation (so the selected sets are nested across fractions). Each
// utterance draws from a stream keyed by (seed, utterance id).
CorruptedCorpus corrupt_corpus(const Corpus& corpus, const CorruptionConfig& cfg, double fraction, std::uint64_t seed,
                               const NeighborIndex& index);

// Indices of the utterances corrupt_corpus would select.
std::vector<std::size_t> select_for_corruption(std::size_t n, double fraction, std::uint64_t seed);

}  // namespace wsp::corruptor
