#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "wsp/config.hpp"
#include "wsp/error.hpp"
#include "wsp/experiment.hpp"
#include "wsp/feature_io.hpp"
#include "wsp/manifest.hpp"
#include "wsp/report.hpp"
#include "wsp/sweep.hpp"
#include "wsp/textkit.hpp"

using namespace wsp;
using namespace wsp::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "wsp_tests" / (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
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

const char* kTiny = R"(
data: {train_utts: 60, dev_utts: 10, test_utts: 10, vocab_size: 40, len_min: 3, len_max: 5}
model: {hidden: 32}
pretrain: {max_epochs: 2}
finetune: {max_epochs: 1}
decoder: {beam_width: 8}
experiment: {clean_subset_size: 10}
sweep: {regimes: [weak_only], modes: [random, full], fractions: [0, 0.25, 0.5, 0.75, 1.0], seeds: [1]}
)";

WorkbenchConfig tiny() { return parse_config(kTiny); }

const Dataset& tiny_data() {
  static const Dataset d = build_dataset(tiny());
  return d;
}

ResultRow sample_row() {
  ResultRow r;
  r.regime = "wsp_ft";
  r.mode = "full";
  r.fraction = 0.75;
  r.decode = "lm";
  r.seed = 3;
  r.pooled_wer = 1.0 / 3.0;
  r.subs = 4;
  r.dels = 2;
  r.ins = 1;
  r.n_ref = 21;
  r.skipped_utts = 5;
  r.wall_time_s = 1.5;
  r.flagged = true;
  r.cell_id = "00ff";
  r.note = "failed: a, \"quoted\" reason";
  return r;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto cfg = parse_config("{}");
  EXPECT_EQ(cfg.data.train_utts, 2000);
  EXPECT_EQ(cfg.experiment.clean_subset_size, 50);
  EXPECT_DOUBLE_EQ(cfg.experiment.self_training_pool, 0.4);
  EXPECT_EQ(cfg.experiment.teacher, Regime::direct_ft);
  EXPECT_DOUBLE_EQ(cfg.pretrain.lr, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.finetune.lr, 1e-4);
  EXPECT_EQ(cfg.finetune.max_epochs, 10);
  EXPECT_EQ(cfg.decoder.beam_width, 64);
  EXPECT_EQ(cfg.model.dim, cfg.data.voice.dim);
}

TEST(Config, RoundTrip) {
  auto cfg = tiny();
  cfg.data.clean_voice_seed = 99;
  cfg.corruption.mode = corruptor::Mode::full;
  cfg.decoder.lm_weight = 0.123456789012345;
  const auto back = parse_config(dump_config(cfg));
  EXPECT_EQ(dump_config(back), dump_config(cfg));
  EXPECT_EQ(back.data.clean_voice_seed, std::optional<std::uint64_t>(99));
  EXPECT_EQ(back.decoder.lm_weight, cfg.decoder.lm_weight);
}

TEST(Config, ShippedDefaultsLoad) {
  const auto cfg = load_config(fs::path(WSP_SOURCE_DIR) / "configs" / "default.yaml");
  EXPECT_EQ(cfg.sweep.regimes.size(), 4u);
  EXPECT_EQ(cfg.sweep.seeds.size(), 5u);
  EXPECT_EQ(cfg.sweep.fractions, (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(Config, Errors) {
  EXPECT_EQ(error_code([] { parse_config("data: {train_utt: 5}"); }), Errc::parse);
  EXPECT_EQ(error_code([] { parse_config("bogus: 1"); }), Errc::parse);
  EXPECT_EQ(error_code([] { parse_config("data: {train_utts: many}"); }), Errc::parse);
  EXPECT_EQ(error_code([] { parse_config("sweep: {regimes: [weak_only, nope]}"); }), Errc::parse);
  EXPECT_EQ(error_code([] { parse_config("experiment: {self_training_pool: 1.5}"); }), Errc::usage);
  EXPECT_EQ(error_code([] { parse_config("sweep: {fractions: [1.3]}"); }), Errc::usage);
  EXPECT_EQ(error_code([] { parse_config("data: ["); }), Errc::parse);
  EXPECT_EQ(error_code([] { load_config("/nonexistent/config.yaml"); }), Errc::io);
}

TEST(CellSpec, Canonical) {
  const CellSpec full0{Regime::weak_only, corruptor::Mode::full, 0.0, 2};
  EXPECT_EQ(full0.canonical().mode, corruptor::Mode::random);
  const CellSpec direct{Regime::direct_ft, corruptor::Mode::full, 0.5, 2};
  EXPECT_EQ(direct.canonical(), (CellSpec{Regime::direct_ft, corruptor::Mode::random, 0.0, 2}));
  EXPECT_EQ(cell_key({Regime::weak_only, corruptor::Mode::full, 0.5, 3}), "weak_only/full/0.50/seed3");
  EXPECT_EQ(cell_key(direct), "direct_ft/seed2");
}

TEST(CellSpec, IdTracksRelevantConfig) {
  const CellSpec spec{Regime::weak_only, corruptor::Mode::full, 0.5, 1};
  auto cfg = tiny();
  const auto id = cell_id(spec, cfg);
  EXPECT_EQ(id.size(), 16u);
  auto other = cfg;
  other.sweep.seeds = {7, 8};
  other.experiment.decode = DecodeMode::greedy;
  EXPECT_EQ(cell_id(spec, other), id);
  other.pretrain.lr = 5e-4;
  EXPECT_NE(cell_id(spec, other), id);
  EXPECT_NE(cell_id({Regime::weak_only, corruptor::Mode::full, 0.5, 2}, cfg), id);
  EXPECT_EQ(cell_id({Regime::weak_only, corruptor::Mode::full, 0.0, 1}, cfg),
            cell_id({Regime::weak_only, corruptor::Mode::random, 0.0, 1}, cfg));
}

TEST(Grid, ExpandOrdersAndDedupes) {
  SweepConfig grid;
  grid.regimes = {Regime::self_training, Regime::wsp_ft, Regime::weak_only, Regime::direct_ft};
  grid.seeds = {1, 2};
  const auto cells = expand_grid(grid);
  // Per seed: 9 weak-only, 9 wsp_ft, 1 direct_ft, 1 self_training.
  EXPECT_EQ(cells.size(), 40u);
  EXPECT_EQ(cells.front().regime, Regime::weak_only);
  std::set<std::string> keys;
  for (const auto& c : cells) EXPECT_TRUE(keys.insert(cell_key(c)).second);
  std::size_t first_ft = 0;
  while (cells[first_ft].regime == Regime::weak_only) ++first_ft;
  for (std::size_t i = first_ft; i < cells.size(); ++i) EXPECT_NE(cells[i].regime, Regime::weak_only);
}

TEST(ResultsCsv, RoundTrip) {
  const auto dir = scratch();
  ResultRow plain = sample_row();
  plain.note.clear();
  plain.flagged = false;
  write_rows(dir / "rows.csv", {sample_row(), plain});
  const auto back = read_rows(dir / "rows.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back[0].same_outcome(sample_row()));
  EXPECT_EQ(back[0].pooled_wer, sample_row().pooled_wer);
  EXPECT_EQ(back[0].wall_time_s, 1.5);
  EXPECT_TRUE(back[1].same_outcome(plain));
  EXPECT_EQ(slurp(dir / "rows.csv").substr(0, std::string(rows_header()).size()), rows_header());
  std::ofstream(dir / "bad.csv") << rows_header() << "\nonly,three,fields\n";
  EXPECT_EQ(error_code([&] { read_rows(dir / "bad.csv"); }), Errc::parse);
}

TEST(Hypotheses, RoundTrip) {
  const auto dir = scratch();
  const std::vector<Hypothesis> hyps{{"a", "the ref", "the hyp"}, {"b", "don't", ""}};
  write_hypotheses(dir / "h.jsonl", hyps);
  EXPECT_EQ(read_hypotheses(dir / "h.jsonl"), hyps);
}

TEST(Report, Formatting) {
  EXPECT_EQ(format_percent(7.0 / 6.0), "116.67%");
  EXPECT_EQ(format_percent(5.0 / 6.0), "83.33%");
  EXPECT_EQ(format_cell(0.0740, 0.0677), "7.40/6.77");
  const auto diff = render_diff(textkit::normalize("Everybody talks about happiness these days."),
                                textkit::normalize("e bod tal abou hapne thel da."));
  EXPECT_NE(diff.find("(116.67%)"), std::string::npos);
  EXPECT_EQ(diff.rfind("REF: ", 0), 0u);
  EXPECT_NE(diff.find("\nHYP: "), std::string::npos);
}

TEST(Report, DiffMarksErrorTypes) {
  const auto diff = render_diff({"a", "b", "c"}, {"a", "x", "c", "d"});
  EXPECT_NE(diff.find("S"), std::string::npos);
  EXPECT_NE(diff.find("I"), std::string::npos);
  EXPECT_NE(diff.find("***"), std::string::npos);
  EXPECT_NE(diff.find("(66.67%)"), std::string::npos);
}

TEST(Report, TableCellsAreGreedySlashLm) {
  std::vector<ResultRow> rows;
  for (const char* mode : {"random", "full"}) {
    for (double f : {0.0, 0.5}) {
      for (std::uint64_t seed : {1, 2, 3}) {
        for (const char* dec : {"greedy", "lm"}) {
          ResultRow r;
          r.regime = "weak_only";
          r.mode = mode;
          r.fraction = f;
          r.decode = dec;
          r.seed = seed;
          r.pooled_wer = (std::string(dec) == "greedy" ? 0.10 : 0.05) + 0.01 * static_cast<double>(seed) + f;
          r.n_ref = 100;
          rows.push_back(r);
        }
      }
    }
  }
  const auto table = wer_table(rows);
  EXPECT_NE(table.find("| weak_only | full | 12.00/7.00 | 62.00/57.00 |"), std::string::npos) << table;
  EXPECT_NE(table.find("| weak_only | random | 12.00/7.00 | 62.00/57.00 |"), std::string::npos) << table;
  const auto report = render_report(rows, {});
  EXPECT_EQ(report.find("Sample transcriptions"), std::string::npos);
  EXPECT_NE(report.find("Error types"), std::string::npos);
  const auto with_samples = render_report(rows, {{"title", "a b", "a c"}});
  EXPECT_NE(with_samples.find("(50.00%)"), std::string::npos);
}

TEST(Dataset, SplitsAndLm) {
  const auto& d = tiny_data();
  EXPECT_EQ(d.train.size(), 60u);
  EXPECT_EQ(d.dev.size(), 10u);
  EXPECT_EQ(d.test.size(), 10u);
  EXPECT_EQ(d.clean_train.size(), d.train.size());
  EXPECT_EQ(d.vocab.size(), 40u);
  EXPECT_EQ(d.lm.order(), 4);
  std::set<std::string> ids;
  for (const auto* split : {&d.train, &d.dev, &d.test}) {
    for (const auto& s : *split) EXPECT_TRUE(ids.insert(s.id).second) << s.id;
  }
}

TEST(Dataset, ReadsManifestDirectory) {
  const auto dir = scratch();
  auto cfg = tiny();
  const auto synthesized = build_dataset(cfg);
  for (const auto& [name, split] : std::vector<std::pair<std::string, const std::vector<acoustic::Sample>*>>{
           {"train", &synthesized.train}, {"dev", &synthesized.dev}, {"test", &synthesized.test}}) {
    std::vector<ManifestRow> rows;
    fs::create_directories(dir / name / "feats");
    for (const auto& s : *split) {
      synth::write_features(dir / name / "feats" / (s.id + ".wspf"), s.frames);
      rows.push_back({s.id, "feats/" + s.id + ".wspf", textkit::join(s.text), 0.0, 1.0});
    }
    write_manifest(dir / name / "manifest.jsonl", rows);
  }
  cfg.data.dir = dir.string();
  const auto loaded = build_dataset(cfg);
  ASSERT_EQ(loaded.train.size(), synthesized.train.size());
  for (std::size_t i = 0; i < loaded.train.size(); ++i) {
    EXPECT_EQ(loaded.train[i].frames, synthesized.train[i].frames);
    EXPECT_EQ(loaded.train[i].text, synthesized.train[i].text);
  }
  EXPECT_TRUE(loaded.lm == synthesized.lm);
}

TEST(Runner, SubsetsAreDisjointAndSized) {
  const auto cfg = tiny();
  Runner runner(cfg, tiny_data(), scratch());
  const auto subset = runner.clean_subset(1), pool = runner.self_training_pool(1);
  EXPECT_EQ(subset.size(), 10u);
  EXPECT_EQ(pool.size(), 20u);  // 40% of the remaining 50
  std::set<std::size_t> all(subset.begin(), subset.end());
  for (auto i : pool) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(runner.clean_subset(1), subset);
  EXPECT_NE(runner.clean_subset(2), subset);
}

TEST(Runner, DeterministicAndResumable) {
  const auto dir = scratch();
  const CellSpec spec{Regime::wsp_ft, corruptor::Mode::full, 1.0, 1};
  Runner a(tiny(), tiny_data(), dir / "a"), b(tiny(), tiny_data(), dir / "b");
  const auto ra = a.run(spec), rb = b.run(spec);
  EXPECT_FALSE(ra.cached);
  ASSERT_EQ(ra.rows.size(), 2u);
  ASSERT_EQ(rb.rows.size(), 2u);
  for (std::size_t i = 0; i < ra.rows.size(); ++i) EXPECT_TRUE(ra.rows[i].same_outcome(rb.rows[i]));
  for (const char* dec : {"greedy", "lm"}) {
    EXPECT_EQ(slurp(a.hypotheses_path(spec, dec)), slurp(b.hypotheses_path(spec, dec)));
  }
  EXPECT_EQ(slurp(a.checkpoint_path(spec)), slurp(b.checkpoint_path(spec)));
  // The upstream weak-only cell was produced on demand.
  EXPECT_TRUE(fs::exists(a.checkpoint_path({Regime::weak_only, corruptor::Mode::full, 1.0, 1})));

  const auto again = a.run(spec);
  EXPECT_TRUE(again.cached);
  for (std::size_t i = 0; i < ra.rows.size(); ++i) EXPECT_TRUE(again.rows[i].same_outcome(ra.rows[i]));

  // Reported numbers equal a rescoring of the persisted hypotheses.
  const auto rescored = rescore_from_hypotheses(ra.rows, dir / "a");
  for (std::size_t i = 0; i < ra.rows.size(); ++i) EXPECT_TRUE(rescored[i].same_outcome(ra.rows[i]));
}

TEST(Runner, MissingCheckpoint) {
  Runner runner(tiny(), tiny_data(), scratch());
  runner.set_auto_dependencies(false);
  EXPECT_EQ(error_code([&] { runner.run_wsp_ft(corruptor::Mode::random, 0.5, 1); }), Errc::missing_checkpoint);
  EXPECT_EQ(error_code([&] { runner.run_self_training(1); }), Errc::missing_checkpoint);
}

TEST(Runner, EmptyCleanSubsetIsIdentity) {
  auto cfg = tiny();
  cfg.experiment.clean_subset_size = 0;
  Runner runner(cfg, tiny_data(), scratch());
  const auto weak = runner.run_weak_only(corruptor::Mode::random, 0.5, 1);
  const auto ft = runner.run_wsp_ft(corruptor::Mode::random, 0.5, 1);
  ASSERT_EQ(weak.rows.size(), ft.rows.size());
  for (std::size_t i = 0; i < weak.rows.size(); ++i) {
    EXPECT_EQ(ft.rows[i].pooled_wer, weak.rows[i].pooled_wer);
    EXPECT_EQ(ft.rows[i].subs, weak.rows[i].subs);
  }
}

TEST(Runner, EmptyPoolSelfTrainingEqualsDirect) {
  auto cfg = tiny();
  cfg.experiment.self_training_pool = 0.0;
  Runner runner(cfg, tiny_data(), scratch());
  const auto direct = runner.run_direct_ft(1);
  const auto student = runner.run_self_training(1);
  ASSERT_EQ(direct.rows.size(), student.rows.size());
  for (std::size_t i = 0; i < direct.rows.size(); ++i) {
    EXPECT_EQ(student.rows[i].pooled_wer, direct.rows[i].pooled_wer);
    EXPECT_EQ(student.rows[i].regime, "self_training");
  }
  EXPECT_EQ(slurp(runner.checkpoint_path({Regime::direct_ft, corruptor::Mode::random, 0.0, 1})),
            slurp(runner.checkpoint_path({Regime::self_training, corruptor::Mode::random, 0.0, 1})));
}

TEST(Runner, NonConvergenceIsFlagged) {
  auto cfg = tiny();
  cfg.pretrain.max_epochs = 1;
  cfg.experiment.clean_subset_size = 2;
  Runner runner(cfg, tiny_data(), scratch());
  const auto out = runner.run_direct_ft(1);
  for (const auto& r : out.rows) {
    EXPECT_EQ(r.flagged, r.pooled_wer >= cfg.experiment.nonconverged_wer);
    if (r.flagged) EXPECT_EQ(r.note, "not converged");
  }
  EXPECT_TRUE(out.rows[0].flagged);
}

TEST(Sweep, CardinalityAndResume) {
  const auto dir = scratch();
  const auto cfg = tiny();
  Runner runner(cfg, tiny_data(), dir);
  const auto first = run_sweep(runner, cfg.sweep, dir / "results.csv");
  EXPECT_EQ(first.rows.size(), 20u);  // 2 modes x 5 fractions x 2 decodes
  EXPECT_EQ(first.executed, 9u);      // the fraction-0 cell is shared by both modes
  EXPECT_EQ(first.failed, 0u);

  // Interrupted sweep: drop two finished cells and run again.
  fs::remove_all(runner.cell_dir({Regime::weak_only, corruptor::Mode::full, 0.75, 1}));
  fs::remove_all(runner.cell_dir({Regime::weak_only, corruptor::Mode::random, 0.25, 1}));
  const auto second = run_sweep(runner, cfg.sweep, dir / "results2.csv");
  EXPECT_EQ(second.executed, 2u);
  EXPECT_EQ(second.cached, 7u);
  ASSERT_EQ(second.rows.size(), first.rows.size());
  for (std::size_t i = 0; i < first.rows.size(); ++i) EXPECT_TRUE(second.rows[i].same_outcome(first.rows[i]));
  const auto on_disk = read_rows(dir / "results.csv");
  ASSERT_EQ(on_disk.size(), first.rows.size());
  for (std::size_t i = 0; i < on_disk.size(); ++i) EXPECT_TRUE(on_disk[i].same_outcome(first.rows[i]));
}

TEST(Sweep, FailedCellsBecomeFlaggedRows) {
  auto cfg = tiny();
  cfg.sweep.regimes = {Regime::wsp_ft};
  cfg.sweep.modes = {corruptor::Mode::full};
  cfg.sweep.fractions = {0.5};
  Runner runner(cfg, tiny_data(), scratch());
  runner.set_auto_dependencies(false);
  const auto res = run_sweep(runner, cfg.sweep, {});
  EXPECT_EQ(res.failed, 1u);
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_TRUE(res.any_flagged());
  EXPECT_EQ(res.rows[0].note.rfind("failed: missing-checkpoint", 0), 0u);
}

namespace {

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(WSP_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch();
  std::ofstream(dir / "tiny.yaml") << kTiny << "\n";
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("score --hyps " + (dir / "missing.jsonl").string()), 2);
  EXPECT_EQ(run_cli("synth -c " + (dir / "nope.yaml").string() + " -o " + dir.string()), 2);
  EXPECT_EQ(run_cli("synth -c " + (dir / "tiny.yaml").string() + " -o " + (dir / "data").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "train" / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "data" / "lm.txt"));
  EXPECT_EQ(run_cli("corrupt -c " + (dir / "tiny.yaml").string() + " -m " + (dir / "data/train/manifest.jsonl").string() +
                    " --mode full --fraction 0.5 -o " + (dir / "weak").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "weak" / "manifest.jsonl"));
}
