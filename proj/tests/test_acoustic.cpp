#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wsp/charset.hpp"
#include "wsp/checkpoint.hpp"
#include "wsp/ctc.hpp"
#include "wsp/error.hpp"
#include "wsp/forced_align.hpp"
#include "wsp/model.hpp"
#include "wsp/rng.hpp"
#include "wsp/synth.hpp"
#include "wsp/textkit.hpp"
#include "wsp/trainer.hpp"

using namespace wsp;
using namespace wsp::acoustic;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "wsp_tests" / (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Errc error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::usage;
}

Eigen::MatrixXd uniform_log_post(int T, int K) { return Eigen::MatrixXd::Constant(T, K, -std::log(double(K))); }

std::vector<int> random_label(std::mt19937_64& rng, int L, int K) {
  std::uniform_int_distribution<int> pick(1, K - 1);
  std::vector<int> label(static_cast<std::size_t>(L));
  for (auto& s : label) s = pick(rng);
  return label;
}

Sample synth_sample(const std::string& text, std::uint64_t seed, const synth::VoiceProfile& voice) {
  Rng rng(seed);
  auto r = synth::render_features(textkit::normalize(text), voice, rng);
  return {"s" + std::to_string(seed), r.features.frames, r.features.gold};
}

ModelShape small_shape() {
  ModelShape s;
  s.hidden = 16;
  return s;
}

}  // namespace

TEST(Model, ZeroWeightsGiveUniformRows) {
  const auto model = AcousticModel::zeros(ModelShape{});
  const synth::FrameMatrix frames = synth::FrameMatrix::Random(7, 16);
  const auto lp = forward(model, frames);
  ASSERT_EQ(lp.rows(), 7);
  ASSERT_EQ(lp.cols(), 29);
  EXPECT_TRUE(((lp.array() + std::log(29.0)).abs() < 1e-12).all());
}

TEST(Model, RowsAreLogSoftmax) {
  const auto model = AcousticModel::init(ModelShape{}, 3);
  const synth::FrameMatrix frames = synth::FrameMatrix::Random(40, 16) * 3.0f;
  const auto lp = forward(model, frames);
  for (Eigen::Index t = 0; t < lp.rows(); ++t) EXPECT_NEAR(lp.row(t).array().exp().sum(), 1.0, 1e-6);
}

TEST(Model, ContextLocality) {
  const auto model = AcousticModel::init(ModelShape{}, 4);
  synth::FrameMatrix frames = synth::FrameMatrix::Random(20, 16);
  const auto before = forward(model, frames);
  const int changed = 9;
  frames.row(changed).array() += 1.5f;
  const auto after = forward(model, frames);
  for (int t = 0; t < 20; ++t) {
    const bool differs = (before.row(t) - after.row(t)).cwiseAbs().maxCoeff() > 0.0;
    EXPECT_EQ(differs, std::abs(t - changed) <= model.shape.context) << "frame " << t;
  }
}

TEST(Model, StackContextZeroPads) {
  synth::FrameMatrix f(2, 1);
  f << 1, 2;
  const auto x = stack_context(f, 1);
  Eigen::MatrixXd expect(2, 3);
  expect << 0, 1, 2, 1, 2, 0;
  EXPECT_EQ(x, expect);
}

TEST(Model, DimensionMismatch) {
  const auto model = AcousticModel::init(ModelShape{}, 1);
  EXPECT_EQ(error_code([&] { forward(model, synth::FrameMatrix::Zero(4, 8)); }), Errc::dimension_mismatch);
}

TEST(Ctc, SingleFrame) {
  const auto r = ctc_loss(uniform_log_post(1, 2), {1});
  EXPECT_NEAR(r.loss, -std::log(0.5), 1e-12);
  EXPECT_NEAR(r.loss, 0.6931, 5e-5);
}

TEST(Ctc, TwoFrames) {
  const auto r = ctc_loss(uniform_log_post(2, 2), {1});
  EXPECT_NEAR(r.loss, -std::log(0.75), 1e-12);
  EXPECT_NEAR(r.loss, 0.2877, 5e-5);
}

TEST(Ctc, MatchesPathEnumeration) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kdist(2, 4), tdist(1, 8);
  int checked = 0;
  while (checked < 200) {
    const int K = kdist(rng), T = tdist(rng);
    const int L = std::uniform_int_distribution<int>(1, 4)(rng);
    const auto label = random_label(rng, L, K);
    if (ctc_min_frames(label) > T) continue;
    const auto lp = oracle::random_log_posteriors(T, K, rng);
    const double expect = oracle::ctc_log_likelihood(lp, label);
    const auto r = ctc_loss(lp, label);
    ASSERT_NEAR(-r.loss, expect, 1e-8) << "T=" << T << " K=" << K << " L=" << L;
    ++checked;
  }
}

TEST(Ctc, TrellisConsistency) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const int T = 30, K = 29;
    const auto label = random_label(rng, 10, K);
    const auto lp = oracle::random_log_posteriors(T, K, rng);
    const auto tr = ctc_trellis(lp, label);
    EXPECT_EQ(tr.extended.size(), 2 * label.size() + 1);
    EXPECT_EQ(tr.log_alpha.rows(), T);
    EXPECT_NEAR(tr.forward_log_likelihood, tr.backward_log_likelihood, 1e-6);
    const double ll = tr.forward_log_likelihood;
    EXPECT_LE(ll, 0.0);
    // Occupancy at every frame sums the same total.
    for (int t = 0; t < T; ++t) {
      double acc = kNegInf;
      for (std::size_t s = 0; s < tr.extended.size(); ++s) {
        acc = log_add(acc, tr.log_alpha(t, static_cast<Eigen::Index>(s)) + tr.log_beta(t, static_cast<Eigen::Index>(s)) -
                               lp(t, tr.extended[s]));
      }
      EXPECT_NEAR(acc, ll, 1e-8);
    }
  }
}

TEST(Ctc, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const int T = 6, K = 5;
  const auto label = random_label(rng, 3, K);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd logits(T, K);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) logits(t, k) = n(rng);
  const auto r = ctc_loss(log_softmax_rows(logits), label);
  const double eps = 1e-6;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      Eigen::MatrixXd up = logits, down = logits;
      up(t, k) += eps;
      down(t, k) -= eps;
      const double num = (ctc_loss(log_softmax_rows(up), label).loss - ctc_loss(log_softmax_rows(down), label).loss) / (2 * eps);
      EXPECT_NEAR(r.grad(t, k), num, 1e-7);
    }
  }
  // Rows of the logit gradient sum to zero.
  EXPECT_LT(r.grad.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ctc, LossNonNegative) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto label = random_label(rng, 5, 29);
    const auto r = ctc_loss(oracle::random_log_posteriors(12, 29, rng, 4.0), label);
    EXPECT_GE(r.loss, 0.0);
    EXPECT_TRUE(std::isfinite(r.loss));
  }
}

TEST(Ctc, LabelTooLong) {
  EXPECT_EQ(ctc_min_frames({1, 1, 2}), 4);
  EXPECT_EQ(error_code([] { ctc_loss(uniform_log_post(3, 3), {1, 1, 2}); }), Errc::label_too_long);
  EXPECT_NO_THROW(ctc_loss(uniform_log_post(4, 3), {1, 1, 2}));
}

TEST(GradCheck, SmallModel) {
  const auto voice = synth::make_voice(5);
  const auto model = AcousticModel::init(small_shape(), 9);
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto sample = synth_sample("bird song", s, voice);
    EXPECT_LT(grad_check(model, sample, 1e-4, 200, s), 1e-4);
  }
}

TEST(GradCheck, DegenerateIsFinite) {
  const auto model = AcousticModel::zeros(small_shape());
  const Sample sample{"z", synth::FrameMatrix::Zero(6, 16), {"ab"}};
  const double err = grad_check(model, sample);
  EXPECT_TRUE(std::isfinite(err));
}

TEST(GradCheck, StableUnderDoubledEpsilon) {
  const auto voice = synth::make_voice(5);
  const auto model = AcousticModel::init(small_shape(), 2);
  const auto sample = synth_sample("hello there", 4, voice);
  EXPECT_LT(grad_check(model, sample, 1e-4), 1e-3);
  EXPECT_LT(grad_check(model, sample, 2e-4), 1e-3);
}

TEST(TrainStep, ZeroLearningRateLeavesModel) {
  const auto voice = synth::make_voice(5);
  auto model = AcousticModel::init(small_shape(), 1);
  const auto before = model.params;
  auto adam = AdamState::for_model(model);
  const auto s = synth_sample("abc", 1, voice);
  const Sample* batch[] = {&s};
  TrainConfig cfg;
  cfg.lr = 0.0;
  const auto r = train_step(model, adam, batch, cfg);
  EXPECT_EQ(model.params, before);
  EXPECT_EQ(r.used, 1u);
}

TEST(TrainStep, OverfitsOneCharacter) {
  const auto voice = synth::make_voice(5);
  auto model = AcousticModel::init(small_shape(), 1);
  auto adam = AdamState::for_model(model);
  const auto s = synth_sample("k", 3, voice);
  const Sample* batch[] = {&s};
  TrainConfig cfg;
  std::vector<double> losses;
  for (int i = 0; i < 200; ++i) losses.push_back(train_step(model, adam, batch, cfg).mean_loss);
  for (int w = 20; w <= 200; w += 20) {
    const double prev = std::accumulate(losses.begin() + w - 20, losses.begin() + w - 10, 0.0);
    const double cur = std::accumulate(losses.begin() + w - 10, losses.begin() + w, 0.0);
    EXPECT_LT(cur, prev) << "window ending at " << w;
  }
  const double p = std::exp(-ctc_loss(forward(model, s.frames), charset::encode("k")).loss);
  EXPECT_GT(p, 0.9);
}

TEST(TrainStep, SkipsLabelsTooLong) {
  auto model = AcousticModel::init(small_shape(), 1);
  auto adam = AdamState::for_model(model);
  const Sample ok{"ok", synth::FrameMatrix::Random(8, 16), {"ab"}};
  const Sample too_long{"long", synth::FrameMatrix::Random(2, 16), {"abcdef"}};
  const Sample* batch[] = {&ok, &too_long};
  const auto r = train_step(model, adam, batch, TrainConfig{});
  EXPECT_EQ(r.used, 1u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(TrainStep, NonFiniteLossRaises) {
  auto model = AcousticModel::init(small_shape(), 1);
  model.params.w1(0, 0) = std::numeric_limits<double>::quiet_NaN();
  auto adam = AdamState::for_model(model);
  const Sample s{"nan", synth::FrameMatrix::Random(8, 16), {"ab"}};
  const Sample* batch[] = {&s};
  EXPECT_EQ(error_code([&] { train_step(model, adam, batch, TrainConfig{}); }), Errc::non_finite_loss);
}

namespace {

std::vector<Sample> tiny_corpus(int n, std::uint64_t seed) {
  const auto voice = synth::make_voice(7);
  synth::CorpusSpec spec;
  spec.vocab = synth::make_pseudo_vocabulary(20, 3);
  spec.voice = voice;
  spec.seed = seed;
  spec.len_min = 2;
  spec.len_max = 4;
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    auto r = synth::generate_utterance(spec, i);
    out.push_back({r.features.utterance_id, r.features.frames, r.features.gold});
  }
  return out;
}

}  // namespace

TEST(Train, DeterministicHistory) {
  const auto corpus = tiny_corpus(24, 1), dev = tiny_corpus(6, 2);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.seed = 5;
  const auto init = AcousticModel::init(small_shape(), 5);
  const auto a = train(init, corpus, dev, cfg), b = train(init, corpus, dev, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].dev_wer, b.history[i].dev_wer);
  }
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.history.size(), 2u);
}

TEST(Train, EmptyDevReturnsLastCheckpoint) {
  const auto corpus = tiny_corpus(16, 1);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  const auto init = AcousticModel::init(small_shape(), 5);
  std::vector<HistoryRow> seen;
  const auto r = train(init, corpus, {}, cfg, [&](const HistoryRow& h) { seen.push_back(h); });
  ASSERT_EQ(r.history.size(), 3u);
  EXPECT_EQ(seen.size(), 3u);
  for (const auto& h : r.history) EXPECT_FALSE(h.dev_wer);
  EXPECT_FALSE(r.best_dev_wer);
  EXPECT_EQ(r.best_epoch, 3);

  EXPECT_NE(r.model.params, init.params);
}

TEST(Train, EarlyStoppingKeepsBestDev) {
  const auto corpus = tiny_corpus(24, 1), dev = tiny_corpus(6, 2);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.patience = 1;
  const auto r = train(AcousticModel::init(small_shape(), 5), corpus, dev, cfg);
  ASSERT_TRUE(r.best_dev_wer);
  for (const auto& h : r.history) EXPECT_GE(*h.dev_wer, *r.best_dev_wer);
  EXPECT_DOUBLE_EQ(greedy_wer(r.model, dev), *r.best_dev_wer);
}

TEST(Train, MinEpochStepsRepeatsPasses) {
  const auto corpus = tiny_corpus(12, 1);  // 2 batches per pass
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.min_epoch_steps = 5;
  const auto init = AcousticModel::init(small_shape(), 5);
  const auto r = train(init, corpus, {}, cfg);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[0].step, 6);
  EXPECT_EQ(r.history[1].step, 12);

  // No minimum, or one below a single pass, leaves training unchanged.
  TrainConfig plain = cfg;
  plain.min_epoch_steps = 0;
  cfg.min_epoch_steps = 2;
  const auto a = train(init, corpus, {}, plain), b = train(init, corpus, {}, cfg);
  EXPECT_EQ(a.history[1].step, 4);
  EXPECT_EQ(a.model.params, b.model.params);
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.min_epoch_steps = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(train(AcousticModel::init(small_shape(), 1), std::vector<Sample>{}, {}, TrainConfig{}), Error);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = scratch();
  const auto model = AcousticModel::init(ModelShape{}, 12);
  save_checkpoint(dir / "m.wspm", model);
  const auto back = load_checkpoint(dir / "m.wspm");
  EXPECT_EQ(back.shape, model.shape);
  EXPECT_EQ(back.params, round_to_float(model).params);
  save_checkpoint(dir / "n.wspm", back);
  EXPECT_EQ(load_checkpoint(dir / "n.wspm").params, back.params);
  EXPECT_EQ(fs::file_size(dir / "m.wspm"), 24u + 4u * model.params.size());
}

TEST(Checkpoint, Errors) {
  const auto dir = scratch();
  EXPECT_EQ(error_code([&] { load_checkpoint(dir / "none.wspm"); }), Errc::missing_checkpoint);
  save_checkpoint(dir / "m.wspm", AcousticModel::init(small_shape(), 1));
  std::ifstream in(dir / "m.wspm", std::ios::binary);
  std::string bytes{std::istreambuf_iterator<char>(in), {}};
  std::ofstream(dir / "short.wspm", std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  EXPECT_EQ(error_code([&] { load_checkpoint(dir / "short.wspm"); }), Errc::truncated);
  bytes[3] = 'X';
  std::ofstream(dir / "magic.wspm", std::ios::binary) << bytes;
  EXPECT_EQ(error_code([&] { load_checkpoint(dir / "magic.wspm"); }), Errc::bad_magic);
}

TEST(ForcedAlign, ConstructedBoundaries) {
  // "ab" with a on frames 0-1 and b on frames 2-3.
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(4, 29);
  const int a = charset::to_output(0), b = charset::to_output(1);
  logits(0, a) = logits(1, a) = 10.0;
  logits(2, b) = logits(3, b) = 10.0;
  const auto spans = forced_align(log_softmax_rows(logits), "ab");
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0], (Span{'a', 0, 1}));
  EXPECT_EQ(spans[1], (Span{'b', 2, 3}));
}

TEST(ForcedAlign, SingleFrame) {
  const auto spans = forced_align(uniform_log_post(1, 29), "a");
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (Span{'a', 0, 0}));
}

TEST(ForcedAlign, SpansAreOrderedAndDisjoint) {
  std::mt19937_64 rng(5);
  const std::string text = "a bb";
  for (int i = 0; i < 50; ++i) {
    const auto lp = oracle::random_log_posteriors(15, 29, rng);
    const auto spans = forced_align(lp, text);
    ASSERT_EQ(spans.size(), text.size());
    int prev_end = -1;
    for (std::size_t c = 0; c < spans.size(); ++c) {
      EXPECT_EQ(spans[c].symbol, text[c]);
      EXPECT_GT(spans[c].start, prev_end);
      EXPECT_LE(spans[c].start, spans[c].end);
      EXPECT_LT(spans[c].end, 15);
      prev_end = spans[c].end;
    }
    // Repeated symbols need a blank between them.
    EXPECT_GT(spans[3].start, spans[2].end + 1);
  }
}

TEST(ForcedAlign, ViterbiPathIsBest) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const int T = 6, K = 3;
    const auto lp = oracle::random_log_posteriors(T, K, rng);
    // Oracle: best single path collapsing to "ab".
    double best = -INFINITY;
    std::vector<int> best_path;
    oracle::for_each_path(T, K, [&](const std::vector<int>& path) {
      if (oracle::collapse(path) != std::vector<int>{1, 2}) return;
      const double s = oracle::path_log_prob(lp, path);
      if (s > best) {
        best = s;
        best_path = path;
      }
    });
    Eigen::MatrixXd full = Eigen::MatrixXd::Constant(T, 29, -1e4);
    full.leftCols(K) = lp;
    const auto spans = forced_align(full, "ab");
    ASSERT_EQ(spans.size(), 2u);
    for (int t = 0; t < T; ++t) {
      int sym = 0;
      for (const auto& sp : spans) {
        if (t >= sp.start && t <= sp.end) sym = charset::to_output(*charset::index_of(sp.symbol));
      }
      EXPECT_EQ(sym, best_path[static_cast<std::size_t>(t)]) << "frame " << t;
    }
  }
}

TEST(ForcedAlign, LabelTooLong) {
  EXPECT_EQ(error_code([] { forced_align(uniform_log_post(2, 29), "abc"); }), Errc::label_too_long);
}
