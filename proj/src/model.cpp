// src/model.cpp
#include "wsp/model.hpp"

#include <cmath>

#include "wsp/error.hpp"
#include "wsp/rng.hpp"

namespace wsp::acoustic {

Parameters Parameters::zeros(const ModelShape& shape) {
  Parameters p;
  p.w1 = Eigen::MatrixXd::Zero(shape.hidden, shape.input_size());
  p.b1 = Eigen::VectorXd::Zero(shape.hidden);
  p.w2 = Eigen::MatrixXd::Zero(shape.n_out, shape.hidden);
  p.b2 = Eigen::VectorXd::Zero(shape.n_out);
  return p;
}

std::size_t Parameters::size() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

double Parameters::squared_norm() const {
  return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
}

void Parameters::set_zero() {
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
}

Parameters& Parameters::operator+=(const Parameters& other) {
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
  return *this;
}

Parameters& Parameters::operator*=(double s) {
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
  return *this;
}

void Parameters::for_each(const std::function<void(double*, Eigen::Index)>& fn) {
  fn(w1.data(), w1.size());
  fn(b1.data(), b1.size());
  fn(w2.data(), w2.size());
  fn(b2.data(), b2.size());
}

void Parameters::for_each(const std::function<void(const double*, Eigen::Index)>& fn) const {
  fn(w1.data(), w1.size());
  fn(b1.data(), b1.size());
  fn(w2.data(), w2.size());
  fn(b2.data(), b2.size());
}

double& Parameters::at(std::size_t i) {
  auto idx = static_cast<Eigen::Index>(i);
  if (idx < w1.size()) return w1.data()[idx];
  idx -= w1.size();
  if (idx < b1.size()) return b1.data()[idx];
  idx -= b1.size();
  if (idx < w2.size()) return w2.data()[idx];
  idx -= w2.size();
  if (idx < b2.size()) return b2.data()[idx];
  throw Error(Errc::dimension_mismatch, "parameter index out of range");
}

AcousticModel AcousticModel::zeros(const ModelShape& shape) { return {shape, Parameters::zeros(shape)}; }

AcousticModel AcousticModel::init(const ModelShape& shape, std::uint64_t seed) {
  AcousticModel m = zeros(shape);
  Rng rng = keyed_stream(seed, "model-init");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s1 = std::sqrt(2.0 / shape.input_size());
  const double s2 = std::sqrt(1.0 / shape.hidden);
  for (Eigen::Index i = 0; i < m.params.w1.size(); ++i) m.params.w1.data()[i] = s1 * normal(rng);
  for (Eigen::Index i = 0; i < m.params.w2.size(); ++i) m.params.w2.data()[i] = s2 * normal(rng);
  return m;
}

bool AcousticModel::all_finite() const {
  return params.w1.allFinite() && params.b1.allFinite() && params.w2.allFinite() && params.b2.allFinite();
}

Eigen::MatrixXd stack_context(const synth::FrameMatrix& frames, int context) {
  const Eigen::Index T = frames.rows();
  const Eigen::Index dim = frames.cols();
  const int width = 2 * context + 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, dim * width);
  for (int k = 0; k < width; ++k) {
    const Eigen::Index offset = k - context;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -offset);
    const Eigen::Index hi = std::min<Eigen::Index>(T, T - offset);
    if (hi <= lo) continue;
    out.block(lo, k * dim, hi - lo, dim) = frames.block(lo + offset, 0, hi - lo, dim).cast<double>();
  }
  return out;
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  return shifted.colwise() - lse;
}

Activations forward_pass(const AcousticModel& model, Eigen::MatrixXd input) {
  if (input.cols() != model.shape.input_size()) {
    throw Error(Errc::dimension_mismatch, "stacked input width " + std::to_string(input.cols()) + " != model input " +
                                               std::to_string(model.shape.input_size()));
  }
  Activations a;
  a.input = std::move(input);
  a.hidden.noalias() = a.input * model.params.w1.transpose();
  a.hidden.rowwise() += model.params.b1.transpose();
  a.hidden = a.hidden.cwiseMax(0.0);
  Eigen::MatrixXd logits;
  logits.noalias() = a.hidden * model.params.w2.transpose();
  logits.rowwise() += model.params.b2.transpose();
  a.log_post = log_softmax_rows(logits);
  return a;
}

Eigen::MatrixXd forward(const AcousticModel& model, const synth::FrameMatrix& frames) {
  if (frames.cols() != model.shape.dim) {
    throw Error(Errc::dimension_mismatch, "feature dim " + std::to_string(frames.cols()) + " != model dim " +
                                               std::to_string(model.shape.dim));
  }
  return forward_pass(model, stack_context(frames, model.shape.context)).log_post;
}

void backward(const AcousticModel& model, const Activations& acts, const Eigen::MatrixXd& grad_logits, double scale,
              Parameters& grads) {
  grads.w2.noalias() += scale * grad_logits.transpose() * acts.hidden;
  grads.b2 += scale * grad_logits.colwise().sum().transpose();
  Eigen::MatrixXd dh = grad_logits * model.params.w2;
  dh = (acts.hidden.array() > 0.0).select(dh, 0.0);
  grads.w1.noalias() += scale * dh.transpose() * acts.input;
  grads.b1 += scale * dh.colwise().sum().transpose();
}

}  // namespace wsp::acoustic
