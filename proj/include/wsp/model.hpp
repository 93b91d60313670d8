// wsp/model.hpp
//
// Context-stacked feed-forward frame classifier:
//   x_t = [f_{t-c} .. f_{t+c}] (zero padded), h = relu(W1 x + b1),
//   log_softmax(W2 h + b2) over 29 outputs (index 0 = blank).
#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "wsp/charset.hpp"
#include "wsp/synth.hpp"

namespace wsp::acoustic {

struct ModelShape {
  int dim = 16;
  int context = 2;
  int hidden = 128;
  int n_out = charset::kNumOutputs;

  int input_size() const { return dim * (2 * context + 1); }
  bool operator==(const ModelShape&) const = default;
};

// Parameter tensors; also used as the container for gradients and Adam moments.
struct Parameters {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // n_out x hidden
  Eigen::VectorXd b2;  // n_out

  static Parameters zeros(const ModelShape& shape);

  std::size_t size() const;
  double squared_norm() const;
  void set_zero();
  Parameters& operator+=(const Parameters& other);
  Parameters& operator*=(double s);

  // Applies `fn` to each tensor's contiguous storage in declaration order.
  void for_each(const std::function<void(double* data, Eigen::Index n)>& fn);
  void for_each(const std::function<void(const double* data, Eigen::Index n)>& fn) const;

  double& at(std::size_t flat_index);
  bool operator==(const Parameters&) const = default;
};

struct AcousticModel {
  ModelShape shape;
  Parameters params;

  // He-normal first layer, scaled normal output layer, zero biases.
  static AcousticModel init(const ModelShape& shape, std::uint64_t seed);
  static AcousticModel zeros(const ModelShape& shape);

  bool all_finite() const;
};

// T x dim(2c+1) stacked input with zero padding at the edges.
Eigen::MatrixXd stack_context(const synth::FrameMatrix& frames, int context);

struct Activations {
  Eigen::MatrixXd input;     // T x input
  Eigen::MatrixXd hidden;    // T x hidden, post-relu
  Eigen::MatrixXd log_post;  // T x n_out
};

Activations forward_pass(const AcousticModel& model, Eigen::MatrixXd input);

// Row-wise log-softmax log posteriors. Throws dimension_mismatch.
Eigen::MatrixXd forward(const AcousticModel& model, const synth::FrameMatrix& frames);

// Accumulates d(loss)/d(params) into `grads`, scaled by `scale`, given the
// gradient with respect to the pre-softmax logits.
void backward(const AcousticModel& model, const Activations& acts, const Eigen::MatrixXd& grad_logits, double scale,
              Parameters& grads);

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits);

}  // namespace wsp::acoustic
