// src/ctc.cpp
#include "wsp/ctc.hpp"

#include <algorithm>

#include "wsp/error.hpp"

namespace wsp::acoustic {

namespace {

using Column = Eigen::ArrayXd;

// Finite stand-in for log(0) inside the recursions. Keeps the vectorized
// exp/log on their fast paths; anything below kImpossible maps back to -inf.
constexpr double kFloor = -1e30;
constexpr double kImpossible = -1e29;
// exp() below this underflows to a denormal and hits a slow path.
constexpr double kExpClamp = -700.0;

double restore(double v) { return v < kImpossible ? kNegInf : v; }

// Scratch for one recursion step: out = logsumexp(a, b, c) + emit.
struct StepBuffers {
  Column b, c, m;
  explicit StepBuffers(Eigen::Index n) : b(n), c(n), m(n) {}

  template <typename Out, typename In, typename Emit>
  void combine(const In& a, const Emit& emit, Out&& out) {
    m = a.max(b).max(c);
    out = m +
          ((a - m).max(kExpClamp).exp() + (b - m).max(kExpClamp).exp() + (c - m).max(kExpClamp).exp()).log() +
          emit;
  }
};

}  // namespace

int ctc_min_frames(const std::vector<int>& label) {
  int n = static_cast<int>(label.size());
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == label[i - 1]) ++n;
  }
  return n;
}

namespace {

// Time-major lattice: columns are frames.
struct Lattice {
  std::vector<int> extended;
  Eigen::ArrayXXd emit;   // S x T, log y_t(ext[s])
  Eigen::ArrayXXd alpha;  // S x T
  Eigen::ArrayXXd beta;   // S x T, includes the emission at t
  double forward_ll = kNegInf;
  double backward_ll = kNegInf;
};

Lattice run_lattice(const Eigen::MatrixXd& log_post, const std::vector<int>& label) {
  const Eigen::Index T = log_post.rows();
  for (int l : label) {
    if (l <= 0 || l >= log_post.cols()) {
      throw Error(Errc::invalid_charset, "label symbol " + std::to_string(l) + " outside the output alphabet");
    }
  }
  if (T < ctc_min_frames(label) || T == 0) {
    throw Error(Errc::label_too_long, "label needs " + std::to_string(ctc_min_frames(label)) + " frames, have " +
                                          std::to_string(T));
  }

  Lattice tr;
  tr.extended.assign(2 * label.size() + 1, 0);
  for (std::size_t i = 0; i < label.size(); ++i) tr.extended[2 * i + 1] = label[i];
  const auto& ext = tr.extended;
  // Rows past the extended label pad S to a whole number of SIMD packets;
  // they carry kFloor emissions and never reach a final state.
  const auto S = static_cast<Eigen::Index>(ext.size() + 7) / 8 * 8;
  const auto S_real = static_cast<Eigen::Index>(ext.size());

  Eigen::ArrayXXd& emit = tr.emit;
  emit = Eigen::ArrayXXd::Constant(S, T, kFloor);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < S_real; ++s) {
      emit(s, t) = std::max(log_post(t, ext[static_cast<std::size_t>(s)]), kFloor);
    }
  }
  // skip_in(s): 0 if s-2 -> s is allowed, else kFloor. skip_out(s): same for s -> s+2.
  Column skip_in = Column::Constant(S, kFloor);
  Column skip_out = Column::Constant(S, kFloor);
  for (Eigen::Index s = 2; s < S_real; ++s) {
    if (ext[static_cast<std::size_t>(s)] != 0 && ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)]) {
      skip_in(s) = 0.0;
      skip_out(s - 2) = 0.0;
    }
  }

  Eigen::ArrayXXd& alpha = tr.alpha;
  alpha = Eigen::ArrayXXd::Constant(S, T, kFloor);
  alpha(0, 0) = emit(0, 0);
  if (S_real > 1) alpha(1, 0) = emit(1, 0);
  StepBuffers buf(S);
  Column& b = buf.b;
  Column& c = buf.c;
  for (Eigen::Index t = 1; t < T; ++t) {
    const auto prev = alpha.col(t - 1);
    b(0) = kFloor;
    b.tail(S - 1) = prev.head(S - 1);
    c.setConstant(kFloor);
    if (S > 2) c.tail(S - 2) = prev.head(S - 2) + skip_in.tail(S - 2);
    buf.combine(prev, emit.col(t), alpha.col(t));
  }

  Eigen::ArrayXXd& beta = tr.beta;
  beta = Eigen::ArrayXXd::Constant(S, T, kFloor);
  beta(S_real - 1, T - 1) = emit(S_real - 1, T - 1);
  if (S_real > 1) beta(S_real - 2, T - 1) = emit(S_real - 2, T - 1);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const auto next = beta.col(t + 1);
    b(S - 1) = kFloor;
    b.head(S - 1) = next.tail(S - 1);
    c.setConstant(kFloor);
    if (S > 2) c.head(S - 2) = next.tail(S - 2) + skip_out.head(S - 2);
    buf.combine(next, emit.col(t), beta.col(t));
  }

  tr.forward_ll = restore(alpha(S_real - 1, T - 1));
  if (S_real > 1) tr.forward_ll = log_add(tr.forward_ll, restore(alpha(S_real - 2, T - 1)));
  tr.backward_ll = restore(beta(0, 0));
  if (S_real > 1) tr.backward_ll = log_add(tr.backward_ll, restore(beta(1, 0)));
  return tr;
}

}  // namespace

CtcTrellis ctc_trellis(const Eigen::MatrixXd& log_post, const std::vector<int>& label) {
  Lattice lat = run_lattice(log_post, label);
  CtcTrellis tr;
  tr.extended = std::move(lat.extended);
  const auto S = static_cast<Eigen::Index>(tr.extended.size());
  auto unpad = [S](const Eigen::ArrayXXd& m) -> Eigen::MatrixXd {
    return m.topRows(S).unaryExpr(&restore).matrix().transpose();
  };
  tr.log_alpha = unpad(lat.alpha);
  tr.log_beta = unpad(lat.beta);
  tr.forward_log_likelihood = lat.forward_ll;
  tr.backward_log_likelihood = lat.backward_ll;
  return tr;
}

CtcResult ctc_loss(const Eigen::MatrixXd& log_post, const std::vector<int>& label) {
  Lattice lat = run_lattice(log_post, label);
  const Eigen::Index T = log_post.rows();
  const auto S = static_cast<Eigen::Index>(lat.extended.size());
  const double ll = lat.forward_ll;

  CtcResult out;
  out.loss = -ll;
  out.grad = log_post.array().exp().matrix();
  if (ll == kNegInf) return out;
  // d loss / d logit(t,k) = y_t(k) - sum_{s: ext[s]=k} alpha_t(s) beta_t(s) / (y_t(k) P)
  const Eigen::ArrayXXd occ = (lat.alpha + lat.beta - lat.emit - ll).max(kExpClamp).exp();
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) out.grad(t, lat.extended[static_cast<std::size_t>(s)]) -= occ(s, t);
  }
  return out;
}

}  // namespace wsp::acoustic
