// src/trainer.cpp
#include "wsp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wsp/charset.hpp"
#include "wsp/ctc.hpp"
#include "wsp/decode.hpp"
#include "wsp/error.hpp"
#include "wsp/rng.hpp"
#include "wsp/textkit.hpp"

namespace wsp::acoustic {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw Error(Errc::usage, "learning rate must be >= 0");
  if (batch_size < 1) throw Error(Errc::usage, "batch_size must be >= 1");
  if (max_epochs < 0) throw Error(Errc::usage, "max_epochs must be >= 0");
  if (min_epoch_steps < 0) throw Error(Errc::usage, "min_epoch_steps must be >= 0");
}

AdamState AdamState::for_model(const AcousticModel& model) {
  return {Parameters::zeros(model.shape), Parameters::zeros(model.shape), 0};
}

namespace {

std::vector<int> label_of(const Sample& s) { return charset::encode(textkit::join(s.text)); }

}  // namespace

StepResult batch_gradient(const AcousticModel& model, std::span<const Sample* const> batch, Parameters& grads) {
  StepResult r;
  std::vector<std::vector<int>> labels;
  std::vector<const Sample*> used;
  Eigen::Index rows = 0;
  for (const Sample* s : batch) {
    if (s->frames.cols() != model.shape.dim) {
      throw Error(Errc::dimension_mismatch, s->id + ": feature dim " + std::to_string(s->frames.cols()));
    }
    auto label = label_of(*s);
    if (ctc_min_frames(label) > s->frames.rows()) {
      ++r.skipped;
      continue;
    }
    labels.push_back(std::move(label));
    used.push_back(s);
    rows += s->frames.rows();
  }
  r.used = used.size();
  if (used.empty()) return r;

  // One stacked input for the whole batch keeps the matrix products large.
  Eigen::MatrixXd input(rows, model.shape.input_size());
  Eigen::Index offset = 0;
  for (const Sample* s : used) {
    input.middleRows(offset, s->frames.rows()) = stack_context(s->frames, model.shape.context);
    offset += s->frames.rows();
  }
  Activations acts = forward_pass(model, std::move(input));

  Eigen::MatrixXd grad_logits(rows, model.shape.n_out);
  double loss_sum = 0.0;
  offset = 0;
  for (std::size_t i = 0; i < used.size(); ++i) {
    const Eigen::Index T = used[i]->frames.rows();
    CtcResult c = ctc_loss(acts.log_post.middleRows(offset, T), labels[i]);
    if (!std::isfinite(c.loss)) {
      std::ostringstream msg;
      msg << "utterance " << used[i]->id << " has loss " << c.loss << " (T=" << T << ", L=" << labels[i].size() << ")";
      throw Error(Errc::non_finite_loss, msg.str());
    }
    loss_sum += c.loss;
    grad_logits.middleRows(offset, T) = c.grad;
    offset += T;
  }
  const double scale = 1.0 / static_cast<double>(used.size());
  backward(model, acts, grad_logits, scale, grads);
  r.mean_loss = loss_sum * scale;
  return r;
}

StepResult train_step(AcousticModel& model, AdamState& adam, std::span<const Sample* const> batch,
                      const TrainConfig& cfg) {
  cfg.validate();
  Parameters grads = Parameters::zeros(model.shape);
  StepResult r = batch_gradient(model, batch, grads);
  if (r.used == 0) return r;

  r.grad_norm = std::sqrt(grads.squared_norm());
  if (!std::isfinite(r.grad_norm)) throw Error(Errc::non_finite_loss, "gradient norm is not finite");
  if (cfg.grad_clip_norm > 0 && r.grad_norm > cfg.grad_clip_norm) grads *= cfg.grad_clip_norm / r.grad_norm;

  ++adam.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
  auto update = [&](Eigen::MatrixXd& p, Eigen::MatrixXd& m, Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    p.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  };
  auto update_vec = [&](Eigen::VectorXd& p, Eigen::VectorXd& m, Eigen::VectorXd& v, const Eigen::VectorXd& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    p.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  };
  update(model.params.w1, adam.m.w1, adam.v.w1, grads.w1);
  update_vec(model.params.b1, adam.m.b1, adam.v.b1, grads.b1);
  update(model.params.w2, adam.m.w2, adam.v.w2, grads.w2);
  update_vec(model.params.b2, adam.m.b2, adam.v.b2, grads.b2);
  return r;
}

double greedy_wer(const AcousticModel& model, std::span<const Sample> samples) {
  std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
  pairs.reserve(samples.size());
  for (const auto& s : samples) pairs.emplace_back(s.text, decode::greedy_decode(forward(model, s.frames)));
  return textkit::corpus_wer(pairs).wer();
}

TrainResult train(const AcousticModel& init, std::span<const Sample> corpus, std::span<const Sample> dev,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.empty()) throw Error(Errc::empty_corpus, "training corpus is empty");

  TrainResult result;
  result.model = init;
  AcousticModel model = init;
  AdamState adam = AdamState::for_model(model);
  std::vector<std::size_t> order(corpus.size());
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    HistoryRow row;
    row.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    std::vector<const Sample*> batch;
    const long epoch_start = adam.step;
    for (int pass = 0; pass == 0 || adam.step - epoch_start < cfg.min_epoch_steps; ++pass) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::string key = "epoch:" + std::to_string(epoch);
      if (pass > 0) key += ":pass:" + std::to_string(pass);
      Rng rng = keyed_stream(cfg.seed, key);
      std::shuffle(order.begin(), order.end(), rng);
      const long pass_start = adam.step;

      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        batch.clear();
        for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i) {
          batch.push_back(&corpus[order[i]]);
        }
        StepResult r = train_step(model, adam, batch, cfg);
        row.skipped += r.skipped;
        loss_sum += r.mean_loss * static_cast<double>(r.used);
        loss_n += r.used;
      }
      if (adam.step == pass_start) break;  // every sample skipped
    }
    row.step = adam.step;
    row.train_loss = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;

    if (!dev.empty()) {
      row.dev_wer = greedy_wer(model, dev);
      if (!result.best_dev_wer || *row.dev_wer < *result.best_dev_wer) {
        result.best_dev_wer = row.dev_wer;
        result.best_epoch = epoch;
        result.model = model;
        stale = 0;
      } else {
        ++stale;
      }
    } else {
      result.model = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(row);
    if (on_epoch) on_epoch(row);
    if (!dev.empty() && stale >= cfg.patience) break;
  }
  return result;
}

namespace {

// Loss plus the on/off pattern of the hidden rectifiers.
std::pair<double, Eigen::ArrayXXd> probe_loss(const AcousticModel& model, const Sample& sample,
                                              const std::vector<int>& label) {
  const auto acts = forward_pass(model, stack_context(sample.frames, model.shape.context));
  return {ctc_loss(acts.log_post, label).loss, (acts.hidden.array() > 0.0).cast<double>()};
}

}  // namespace

double grad_check(const AcousticModel& model, const Sample& sample, double epsilon, int n_params, std::uint64_t seed) {
  const std::vector<int> label = label_of(sample);
  Parameters grads = Parameters::zeros(model.shape);
  const Sample* one[] = {&sample};
  batch_gradient(model, one, grads);

  AcousticModel probe = model;
  Rng rng = keyed_stream(seed, "grad-check");
  const auto n_total = static_cast<int>(model.params.size());
  double worst = 0.0;
  int checked = 0;
  for (int draws = 0; checked < n_params && draws < 20 * n_params; ++draws) {
    const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, n_total - 1));
    const double orig = probe.params.at(idx);
    probe.params.at(idx) = orig + epsilon;
    const auto [up, up_on] = probe_loss(probe, sample, label);
    probe.params.at(idx) = orig - epsilon;
    const auto [down, down_on] = probe_loss(probe, sample, label);
    probe.params.at(idx) = orig;
    if (!(up_on == down_on).all()) continue;
    ++checked;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = grads.at(idx);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    const double rel = std::abs(numeric - analytic) / denom;
    if (std::isfinite(rel)) worst = std::max(worst, rel);
    else worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

}  // namespace wsp::acoustic
