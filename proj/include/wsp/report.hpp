// wsp/report.hpp
//
// Markdown reports: a greedy/LM WER table over the sweep grid, pooled error
// breakdowns per regime, and aligned reference/hypothesis diffs.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wsp/experiment.hpp"
#include "wsp/textkit.hpp"

namespace wsp::harness {

// 7/6 -> "116.67%"
std::string format_percent(double ratio);
// Percent values with two decimals joined by a slash, e.g. "7.40/6.77".
std::string format_cell(double greedy, double lm);

struct DiffSample {
  std::string title;
  std::string ref;
  std::string hyp;
};

// Column-aligned REF/HYP lines with S/D/I markers; the HYP line ends with
// the sample's WER in parentheses.
std::string render_diff(const TokenSeq& ref, const TokenSeq& hyp);

// Median over seeds of each (regime, mode, fraction) cell.
std::string wer_table(const std::vector<ResultRow>& rows);
std::string error_breakdown(const std::vector<ResultRow>& rows);
std::string render_report(const std::vector<ResultRow>& rows, const std::vector<DiffSample>& samples);

// Rows with counts and WER recomputed from the hypotheses persisted under
// <work_dir>/cells/<cell_id>/. Failed rows (no hypotheses) pass through.
std::vector<ResultRow> rescore_from_hypotheses(const std::vector<ResultRow>& rows,
                                               const std::filesystem::path& work_dir);

// Up to `per_cell` utterances with errors from the first seed of each
// (regime, mode, highest fraction) cell, LM decode.
std::vector<DiffSample> pick_samples(const std::vector<ResultRow>& rows, const std::filesystem::path& work_dir,
                                     std::size_t per_cell);

}  // namespace wsp::harness
