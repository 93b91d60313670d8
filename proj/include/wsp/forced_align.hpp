// wsp/forced_align.hpp
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "wsp/model.hpp"

namespace wsp::acoustic {

// Frames [start, end] (inclusive) during which the Viterbi path sits on the
// symbol. Blank frames belong to no span.
struct Span {
  char symbol;
  int start;
  int end;

  bool operator==(const Span&) const = default;
};

// Viterbi best path through the blank-augmented trellis. Throws
// label_too_long.
std::vector<Span> forced_align(const Eigen::MatrixXd& log_post, const std::string& text);
std::vector<Span> forced_align(const AcousticModel& model, const synth::FrameMatrix& frames, const std::string& text);

}  // namespace wsp::acoustic
