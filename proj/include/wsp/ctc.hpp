// wsp/ctc.hpp
//
// CTC forward-backward in log space. Labels are model output indices
// (1..K-1); index 0 is the blank. Works for any alphabet size K.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace wsp::acoustic {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// Smallest T that admits `label`: its length plus one frame per adjacent repeat.
int ctc_min_frames(const std::vector<int>& label);

struct CtcTrellis {
  std::vector<int> extended;   // blank-interleaved label, length 2L+1
  Eigen::MatrixXd log_alpha;   // T x (2L+1)
  Eigen::MatrixXd log_beta;    // T x (2L+1), includes the emission at t
  double forward_log_likelihood = kNegInf;
  double backward_log_likelihood = kNegInf;
};

// Throws label_too_long when T < ctc_min_frames(label).
CtcTrellis ctc_trellis(const Eigen::MatrixXd& log_post, const std::vector<int>& label);

struct CtcResult {
  double loss = 0.0;          // -log P(label | posteriors)
  Eigen::MatrixXd grad;       // d loss / d logits, T x K
};

CtcResult ctc_loss(const Eigen::MatrixXd& log_post, const std::vector<int>& label);

}  // namespace wsp::acoustic
