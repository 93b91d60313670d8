// wsp/ngram_lm.hpp
//
// Character n-gram language model with add-k smoothing:
//   P(c | h) = (count(h, c) + k) / (count(h) + k * |V|)
// V is the 28 charset symbols plus begin and end sentence markers.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsp/utterance.hpp"

namespace wsp::decode {

class NgramLM {
 public:
  static constexpr int kBos = 28;
  static constexpr int kEos = 29;
  static constexpr int kVocabSize = 30;
  static constexpr int kMaxOrder = 12;

  using State = std::uint64_t;  // last n-1 symbols, 5 bits each

  NgramLM() = default;
  NgramLM(int order, double k);

  int order() const { return order_; }
  double k() const { return k_; }

  // Context of a fresh sentence: n-1 begin markers.
  State start() const;
  State advance(State state, int symbol) const;
  double prob(State state, int symbol) const;
  double log_prob(State state, int symbol) const;

  void add_count(State context, int symbol, std::uint32_t count);
  void add_sentence(const std::string& text);

  std::size_t num_contexts() const { return counts_.size(); }
  std::vector<int> context_symbols(State state) const;
  State make_state(const std::vector<int>& symbols) const;

  // Sentence log-probability including the end marker.
  double sentence_log_prob(const std::string& text) const;

  // "wsplm v1 n=<n> k=<k>" then sorted "context<TAB>char<TAB>count" rows.
  void save(const std::filesystem::path& path) const;
  static NgramLM load(const std::filesystem::path& path);

  bool operator==(const NgramLM& other) const;

 private:
  struct Row {
    std::array<std::uint32_t, kVocabSize> counts{};
    std::uint64_t total = 0;
  };

  int order_ = 4;
  double k_ = 0.1;
  std::uint64_t mask_ = 0;
  std::unordered_map<State, Row> counts_;
};

// Symbols: charset index for a-z, space, apostrophe; kBos/kEos markers.
char lm_symbol_char(int symbol);
int lm_symbol_from_char(char c);

// Throws empty_corpus.
NgramLM train_lm(const std::vector<TokenSeq>& texts, int order = 4, double k = 0.1);

}  // namespace wsp::decode
