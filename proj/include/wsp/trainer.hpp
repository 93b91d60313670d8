// wsp/trainer.hpp
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsp/model.hpp"
#include "wsp/utterance.hpp"

namespace wsp::acoustic {

// One utterance's features with its (possibly weak) transcript.
struct Sample {
  std::string id;
  synth::FrameMatrix frames;
  TokenSeq text;
};

struct TrainConfig {
  int batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 5.0;
  int max_epochs = 20;
  int patience = 5;  // evaluations without dev improvement before stopping
  // An epoch repeats shuffled passes until it has taken at least this many
  // optimizer steps, so small corpora get the same budget per evaluation.
  int min_epoch_steps = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  Parameters m;
  Parameters v;
  long step = 0;

  static AdamState for_model(const AcousticModel& model);
};

struct StepResult {
  double mean_loss = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // labels too long for their frame count
  double grad_norm = 0.0;   // before clipping
};

// Mean CTC loss and its gradient over the batch. Gradients are reduced in
// batch order. Throws non_finite_loss.
StepResult batch_gradient(const AcousticModel& model, std::span<const Sample* const> batch, Parameters& grads);

// One Adam update with global-norm clipping.
StepResult train_step(AcousticModel& model, AdamState& adam, std::span<const Sample* const> batch,
                      const TrainConfig& cfg);

struct HistoryRow {
  int epoch = 0;
  long step = 0;
  double train_loss = 0.0;
  std::optional<double> dev_wer;  // absent when the dev set is empty
  std::size_t skipped = 0;
};

struct TrainResult {
  AcousticModel model;  // best dev checkpoint, or the last one without dev data
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  std::optional<double> best_dev_wer;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

// Epochs over seeded shuffles, greedy dev WER after every epoch, early
// stopping on dev WER.
TrainResult train(const AcousticModel& init, std::span<const Sample> corpus, std::span<const Sample> dev,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Pooled greedy-decoding WER of `model` on `samples`.
double greedy_wer(const AcousticModel& model, std::span<const Sample> samples);

// Central finite differences on `n_params` random parameters against the
// analytic CTC gradient of a single sample; returns the max relative error.
// A parameter whose +/-epsilon probes switch any rectifier on or off sits on
// a kink, where the difference quotient is meaningless; it is redrawn.
double grad_check(const AcousticModel& model, const Sample& sample, double epsilon = 1e-4, int n_params = 200,
                  std::uint64_t seed = 0);

}  // namespace wsp::acoustic
