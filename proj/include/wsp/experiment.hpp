// wsp/experiment.hpp
//
// The four training regimes. Each cell (regime, corruption mode, fraction,
// seed) trains one model, decodes the test set and persists its results,
// hypotheses and checkpoint under <work_dir>/cells/<cell id>/.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsp/config.hpp"
#include "wsp/ngram_lm.hpp"
#include "wsp/trainer.hpp"

namespace wsp::harness {

struct CellSpec {
  Regime regime = Regime::weak_only;
  corruptor::Mode mode = corruptor::Mode::random;
  double fraction = 0.0;
  std::uint64_t seed = 1;

  // Regimes without a weak pretraining stage ignore mode and fraction; the
  // same holds for the corruption mode at fraction 0.
  CellSpec canonical() const;
  bool operator==(const CellSpec&) const = default;
};

// Readable key such as "weak_only/full/0.50/seed3" (of the canonical spec).
std::string cell_key(const CellSpec& spec);
// Hex content hash of the canonical spec and every config section that can
// change the cell's output.
std::string cell_id(const CellSpec& spec, const WorkbenchConfig& cfg);

struct ResultRow {
  std::string regime;
  std::string mode;
  double fraction = 0.0;
  std::string decode;  // greedy | lm
  std::uint64_t seed = 0;
  double pooled_wer = 0.0;
  std::size_t subs = 0;
  std::size_t dels = 0;
  std::size_t ins = 0;
  std::size_t n_ref = 0;
  std::size_t skipped_utts = 0;
  double wall_time_s = 0.0;
  bool flagged = false;  // non-convergence (WER at or above the configured bound) or failure
  std::string cell_id;
  std::string note;

  // Equality on everything except wall time.
  bool same_outcome(const ResultRow& other) const;
};

struct Hypothesis {
  std::string id;
  std::string ref;
  std::string hyp;
  bool operator==(const Hypothesis&) const = default;
};

void write_hypotheses(const std::filesystem::path& path, const std::vector<Hypothesis>& hyps);
std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path);

struct Dataset {
  std::vector<acoustic::Sample> train;        // gold transcripts, training voice
  std::vector<acoustic::Sample> clean_train;  // same utterances in the clean-subset voice
  std::vector<acoustic::Sample> dev;
  std::vector<acoustic::Sample> test;
  std::vector<std::string> vocab;  // neighbor vocabulary for corruption
  decode::NgramLM lm{4, 0.1};      // trained on the gold training text
};

// Synthesizes the corpora described by cfg.data, or reads them from
// cfg.data.dir when set.
Dataset build_dataset(const WorkbenchConfig& cfg);

struct CellOutcome {
  CellSpec spec;
  std::string id;
  std::vector<ResultRow> rows;  // one per evaluated decode
  bool cached = false;
};

class Runner {
 public:
  Runner(WorkbenchConfig cfg, const Dataset& data, std::filesystem::path work_dir);

  // Runs the cell, or returns its persisted rows when present. Missing
  // upstream checkpoints are produced first unless auto_dependencies is off,
  // in which case they raise missing_checkpoint.
  CellOutcome run(const CellSpec& spec);

  CellOutcome run_weak_only(corruptor::Mode mode, double fraction, std::uint64_t seed);
  CellOutcome run_wsp_ft(corruptor::Mode mode, double fraction, std::uint64_t seed);
  CellOutcome run_direct_ft(std::uint64_t seed);
  CellOutcome run_self_training(std::uint64_t seed);

  std::filesystem::path cell_dir(const CellSpec& spec) const;
  std::filesystem::path checkpoint_path(const CellSpec& spec) const;
  std::filesystem::path hypotheses_path(const CellSpec& spec, std::string_view decode) const;

  // Indices into the training set.
  std::vector<std::size_t> clean_subset(std::uint64_t seed) const;
  std::vector<std::size_t> self_training_pool(std::uint64_t seed) const;

  const WorkbenchConfig& config() const { return cfg_; }
  void set_auto_dependencies(bool on) { auto_dependencies_ = on; }
  void set_logger(std::function<void(const std::string&)> log) { log_ = std::move(log); }

 private:
  struct Trained {
    acoustic::AcousticModel model;
    std::size_t skipped = 0;
  };

  Trained train_weak(const CellSpec& spec);
  Trained train_wsp_ft(const CellSpec& spec);
  Trained train_direct(const CellSpec& spec);
  Trained train_student(const CellSpec& spec);
  acoustic::AcousticModel upstream_model(const CellSpec& upstream);
  std::vector<ResultRow> evaluate(const CellSpec& spec, const acoustic::AcousticModel& model, std::size_t skipped,
                                  double wall_time_s);
  acoustic::TrainResult fit(const acoustic::AcousticModel& init, const std::vector<acoustic::Sample>& corpus,
                            const acoustic::TrainConfig& tc, const std::string& label);
  void log(const std::string& msg) const;

  WorkbenchConfig cfg_;
  const Dataset& data_;
  std::filesystem::path work_dir_;
  bool auto_dependencies_ = true;
  std::function<void(const std::string&)> log_;
};

// Results tables: CSV with a header row, one row per (cell, decode, seed).
// Used for each cell's rows.csv and for the merged sweep table.
const char* rows_header();
std::string format_row(const ResultRow& row);
std::vector<ResultRow> read_rows(const std::filesystem::path& path);
void write_rows(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

}  // namespace wsp::harness
