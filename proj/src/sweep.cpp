// src/sweep.cpp
#include "wsp/sweep.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "wsp/error.hpp"

namespace wsp::harness {

namespace {

int regime_rank(const std::string& name) {
  try {
    return static_cast<int>(parse_regime(name));
  } catch (const Error&) {
    return 99;
  }
}

}  // namespace

std::vector<CellSpec> expand_grid(const SweepConfig& grid) {
  std::vector<Regime> regimes = grid.regimes;
  std::sort(regimes.begin(), regimes.end());
  std::vector<CellSpec> out;
  std::set<std::string> seen;
  auto add = [&](const CellSpec& spec) {
    const CellSpec c = spec.canonical();
    if (seen.insert(cell_key(c)).second) out.push_back(c);
  };
  for (Regime r : regimes) {
    for (auto seed : grid.seeds) {
      if (r == Regime::direct_ft || r == Regime::self_training) {
        add(CellSpec{r, corruptor::Mode::random, 0.0, seed});
        continue;
      }
      for (auto mode : grid.modes) {
        for (double f : grid.fractions) add(CellSpec{r, mode, f, seed});
      }
    }
  }
  return out;
}

bool SweepResult::any_flagged() const {
  return std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.flagged; });
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::make_tuple(regime_rank(a.regime), a.mode, a.fraction, a.seed, a.decode) <
           std::make_tuple(regime_rank(b.regime), b.mode, b.fraction, b.seed, b.decode);
  });
}

SweepResult run_sweep(Runner& runner, const SweepConfig& grid, const std::filesystem::path& results_csv) {
  SweepResult result;
  std::map<std::string, std::vector<ResultRow>> done;  // canonical key -> rows
  std::vector<Regime> regimes = grid.regimes;
  std::sort(regimes.begin(), regimes.end());
  std::set<std::string> emitted;

  auto execute = [&](const CellSpec& spec) -> const std::vector<ResultRow>& {
    const std::string key = cell_key(spec);
    auto it = done.find(key);
    if (it != done.end()) return it->second;
    std::vector<ResultRow> rows;
    try {
      CellOutcome out = runner.run(spec);
      (out.cached ? result.cached : result.executed) += 1;
      rows = std::move(out.rows);
    } catch (const Error& e) {
      ++result.failed;
      const CellSpec c = spec.canonical();
      for (const char* dec : {"greedy", "lm"}) {
        ResultRow r;
        r.regime = to_string(c.regime);
        r.mode = corruptor::to_string(c.mode);
        r.fraction = c.fraction;
        r.decode = dec;
        r.seed = c.seed;
        r.pooled_wer = 1.0;
        r.flagged = true;
        r.cell_id = cell_id(c, runner.config());
        r.note = std::string("failed: ") + e.what();
        rows.push_back(std::move(r));
      }
    }
    return done.emplace(key, std::move(rows)).first->second;
  };

  // One row set per grid point. The uncorrupted cell is trained once and
  // reported under every mode of the grid.
  for (const CellSpec& spec : expand_grid(grid)) execute(spec);
  for (Regime r : regimes) {
    for (auto seed : grid.seeds) {
      std::vector<CellSpec> points;
      if (r == Regime::direct_ft || r == Regime::self_training) {
        points.push_back(CellSpec{r, corruptor::Mode::random, 0.0, seed});
      } else {
        for (auto mode : grid.modes) {
          for (double f : grid.fractions) points.push_back(CellSpec{r, mode, f, seed});
        }
      }
      for (const CellSpec& p : points) {
        const bool has_mode = r == Regime::weak_only || r == Regime::wsp_ft;
        const std::string label = has_mode ? corruptor::to_string(p.mode) : corruptor::to_string(corruptor::Mode::random);
        if (!emitted.insert(cell_key(p) + "|" + label).second) continue;
        for (ResultRow row : execute(p)) {
          row.mode = label;
          result.rows.push_back(std::move(row));
        }
      }
    }
  }
  sort_rows(result.rows);
  if (!results_csv.empty()) {
    if (results_csv.has_parent_path()) std::filesystem::create_directories(results_csv.parent_path());
    write_rows(results_csv, result.rows);
  }
  return result;
}

}  // namespace wsp::harness
