// src/forced_align.cpp
#include "wsp/forced_align.hpp"

#include "wsp/charset.hpp"
#include "wsp/ctc.hpp"
#include "wsp/error.hpp"

namespace wsp::acoustic {

std::vector<Span> forced_align(const Eigen::MatrixXd& log_post, const std::string& text) {
  const std::vector<int> label = charset::encode(text);
  const Eigen::Index T = log_post.rows();
  if (T == 0 || T < ctc_min_frames(label)) {
    throw Error(Errc::label_too_long, "'" + text + "' needs " + std::to_string(ctc_min_frames(label)) +
                                          " frames, have " + std::to_string(T));
  }
  std::vector<int> ext(2 * label.size() + 1, charset::kBlank);
  for (std::size_t i = 0; i < label.size(); ++i) ext[2 * i + 1] = label[i];
  const auto S = static_cast<Eigen::Index>(ext.size());

  Eigen::MatrixXd score = Eigen::MatrixXd::Constant(T, S, kNegInf);
  Eigen::MatrixXi back = Eigen::MatrixXi::Constant(T, S, -1);
  score(0, 0) = log_post(0, ext[0]);
  if (S > 1) score(0, 1) = log_post(0, ext[1]);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      Eigen::Index from = s;
      double best = score(t - 1, s);
      if (s >= 1 && score(t - 1, s - 1) > best) best = score(t - 1, from = s - 1);
      if (s >= 2 && ext[s] != charset::kBlank && ext[s] != ext[s - 2] && score(t - 1, s - 2) > best) {
        best = score(t - 1, from = s - 2);
      }
      if (best == kNegInf) continue;
      score(t, s) = best + log_post(t, ext[s]);
      back(t, s) = static_cast<int>(from);
    }
  }

  Eigen::Index s = S - 1;
  if (S > 1 && score(T - 1, S - 2) > score(T - 1, S - 1)) s = S - 2;
  std::vector<Eigen::Index> states(static_cast<std::size_t>(T));
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    states[static_cast<std::size_t>(t)] = s;
    if (t > 0) s = back(t, s);
  }

  std::vector<Span> spans;
  Eigen::Index current = -1;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index st = states[static_cast<std::size_t>(t)];
    if (ext[st] == charset::kBlank) {
      current = -1;
      continue;
    }
    if (st == current) {
      spans.back().end = static_cast<int>(t);
    } else {
      spans.push_back({charset::symbol(charset::from_output(ext[st])), static_cast<int>(t), static_cast<int>(t)});
      current = st;
    }
  }
  return spans;
}

std::vector<Span> forced_align(const AcousticModel& model, const synth::FrameMatrix& frames, const std::string& text) {
  return forced_align(forward(model, frames), text);
}

}  // namespace wsp::acoustic
