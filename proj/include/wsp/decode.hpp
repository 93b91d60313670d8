// wsp/decode.hpp
//
// CTC decoding: greedy best path and prefix beam search with shallow fusion
// of a character n-gram LM.
#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "wsp/ngram_lm.hpp"
#include "wsp/utterance.hpp"

namespace wsp::decode {

// Merge adjacent repeats, then drop blanks (output index 0).
std::string collapse(const std::vector<int>& path);

// Per-frame argmax, ties to the lowest index.
std::vector<int> best_path(const Eigen::MatrixXd& log_post);

TokenSeq greedy_decode(const Eigen::MatrixXd& log_post);

struct DecoderConfig {
  int beam_width = 64;
  double lm_weight = 1.2;          // alpha
  double insertion_bonus = 0.5;    // beta, per emitted character
  double prune_logp = -12.0;       // skip characters below this frame log-prob

  void validate() const;
};

struct Hypothesis {
  std::vector<int> label;   // output indices, no blanks
  double acoustic = 0.0;    // log P_ctc(label | posteriors) as tracked by the search
  double fusion = 0.0;      // alpha * log P_lm (incl. end marker) + beta * |label|
  double score() const { return acoustic + fusion; }
};

// Hypotheses remaining in the beam after the last frame, best first.
// `lm` may be null (acoustic score plus insertion bonus only).
std::vector<Hypothesis> beam_search(const Eigen::MatrixXd& log_post, const NgramLM* lm, const DecoderConfig& cfg);

TokenSeq beam_decode(const Eigen::MatrixXd& log_post, const NgramLM* lm, const DecoderConfig& cfg);

// Score the search would assign to `label` if it survived: exact CTC
// log-probability plus the fusion terms.
double fusion_score(const Eigen::MatrixXd& log_post, const std::vector<int>& label, const NgramLM* lm,
                    const DecoderConfig& cfg);

}  // namespace wsp::decode
