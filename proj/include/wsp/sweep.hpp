// wsp/sweep.hpp
//
// Grid runner over regimes x modes x fractions x seeds. Cells are keyed by
// content hash, so an interrupted sweep resumes where it stopped.
#pragma once

#include <filesystem>
#include <vector>

#include "wsp/experiment.hpp"

namespace wsp::harness {

// Distinct canonical cells of the grid, in execution order (weak-only cells
// first so fine-tuning finds its checkpoints).
std::vector<CellSpec> expand_grid(const SweepConfig& grid);

struct SweepResult {
  std::vector<ResultRow> rows;  // sorted by (regime, mode, fraction, seed, decode)
  std::size_t executed = 0;     // cells trained in this call
  std::size_t cached = 0;       // cells found on disk
  std::size_t failed = 0;

  bool any_flagged() const;
};

// Runs every cell of the grid (failures become flagged rows and the sweep
// continues) and writes `results_csv`. Rows follow the grid points: the
// fraction-0 cell is trained once and reported under each mode.
SweepResult run_sweep(Runner& runner, const SweepConfig& grid, const std::filesystem::path& results_csv);

void sort_rows(std::vector<ResultRow>& rows);

}  // namespace wsp::harness
