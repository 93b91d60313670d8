// wsp/textkit.hpp
//
// Text normalization, Levenshtein token alignment and word error rate.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wsp/utterance.hpp"

namespace wsp::textkit {

// Lowercase, strip punctuation (apostrophes survive inside words),
// whitespace-tokenize. Digits pass through as tokens.
TokenSeq normalize(std::string_view raw);

std::string join(const TokenSeq& tokens);

enum class OpKind { match, substitute, del, insert };

struct EditOp {
  OpKind kind;
  std::string ref;  // empty for insert
  std::string hyp;  // empty for del

  bool operator==(const EditOp&) const = default;
};

struct Alignment {
  std::vector<EditOp> ops;

  std::size_t count(OpKind kind) const;
  std::size_t cost() const;
  TokenSeq ref_side() const;
  TokenSeq hyp_side() const;
};

// Minimal unit-cost alignment. When several operations reach the same cost
// the traceback prefers match, then substitute, then delete, then insert.
Alignment align(const TokenSeq& ref, const TokenSeq& hyp);

struct WerReport {
  std::size_t n_ref = 0;
  std::size_t subs = 0;
  std::size_t dels = 0;
  std::size_t ins = 0;

  std::size_t errors() const { return subs + dels + ins; }
  double wer() const { return static_cast<double>(errors()) / static_cast<double>(n_ref); }

  WerReport& operator+=(const WerReport& other);
  bool operator==(const WerReport&) const = default;
};

// Throws Errc::empty_reference when ref is empty.
WerReport wer(const TokenSeq& ref, const TokenSeq& hyp);

// Pooled counts over all pairs, not the mean of per-utterance ratios.
// Throws Errc::empty_corpus when there are no pairs or no reference words.
WerReport corpus_wer(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs);

}  // namespace wsp::textkit
