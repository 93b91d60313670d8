// src/report.cpp
#include "wsp/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "wsp/error.hpp"
#include "wsp/sweep.hpp"

namespace wsp::harness {

namespace fs = std::filesystem;

std::string format_percent(double ratio) { return fmt::format("{:.2f}%", 100.0 * ratio); }

std::string format_cell(double greedy, double lm) { return fmt::format("{:.2f}/{:.2f}", 100.0 * greedy, 100.0 * lm); }

std::string render_diff(const TokenSeq& ref, const TokenSeq& hyp) {
  const auto al = textkit::align(ref, hyp);
  std::string r = "REF: ", h = "HYP: ", m = "     ";
  for (const auto& op : al.ops) {
    const std::string rs = op.kind == textkit::OpKind::insert ? "***" : op.ref;
    const std::string hs = op.kind == textkit::OpKind::del ? "***" : op.hyp;
    const std::size_t w = std::max(rs.size(), hs.size());
    char mark = ' ';
    if (op.kind == textkit::OpKind::substitute) mark = 'S';
    if (op.kind == textkit::OpKind::del) mark = 'D';
    if (op.kind == textkit::OpKind::insert) mark = 'I';
    r += fmt::format("{:<{}} ", rs, w);
    h += fmt::format("{:<{}} ", hs, w);
    m += fmt::format("{:<{}} ", std::string(1, mark), w);
  }
  auto rtrim = [](std::string s) {
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
  };
  std::string out = rtrim(r) + "\n" + rtrim(h);
  if (!ref.empty()) out += " (" + format_percent(textkit::wer(ref, hyp).wer()) + ")";
  out += "\n";
  const std::string marks = rtrim(m);
  if (marks.size() > 5) out += marks + "\n";
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int regime_order(const std::string& name) {
  try {
    return static_cast<int>(parse_regime(name));
  } catch (const Error&) {
    return 99;
  }
}

bool has_grid(const std::string& regime) { return regime == "weak_only" || regime == "wsp_ft"; }

}  // namespace

std::string wer_table(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<int, std::string, std::string>;  // regime order, regime, mode
  std::map<Key, std::map<double, std::map<std::string, std::vector<double>>>> cells;
  std::set<double> fractions;
  std::set<std::uint64_t> seeds;
  for (const auto& r : rows) {
    const double f = has_grid(r.regime) ? r.fraction : -1.0;
    cells[{regime_order(r.regime), r.regime, has_grid(r.regime) ? r.mode : "-"}][f][r.decode].push_back(r.pooled_wer);
    if (f >= 0) fractions.insert(f);
    seeds.insert(r.seed);
  }
  std::string out = fmt::format("WER (%) as greedy/LM, median over {} seed(s).\n\n", seeds.size());
  out += "| regime | mode |";
  std::string rule = "|---|---|";
  for (double f : fractions) {
    out += fmt::format(" {:.0f}% |", 100.0 * f);
    rule += "---|";
  }
  if (fractions.empty()) {
    out += " all |";
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  auto cell_text = [](const std::map<std::string, std::vector<double>>& by_decode) {
    auto g = by_decode.find("greedy");
    auto l = by_decode.find("lm");
    if (g != by_decode.end() && l != by_decode.end()) return format_cell(median(g->second), median(l->second));
    if (g != by_decode.end()) return fmt::format("{:.2f}/-", 100.0 * median(g->second));
    if (l != by_decode.end()) return fmt::format("-/{:.2f}", 100.0 * median(l->second));
    return std::string();
  };
  for (const auto& [key, by_fraction] : cells) {
    out += fmt::format("| {} | {} |", std::get<1>(key), std::get<2>(key));
    if (by_fraction.count(-1.0)) {
      // No corruption axis: one value spanning the fraction columns.
      out += " " + cell_text(by_fraction.at(-1.0)) + " |";
      for (std::size_t i = 1; i < fractions.size(); ++i) out += " |";
    } else {
      for (double f : fractions) {
        auto it = by_fraction.find(f);
        out += " " + (it == by_fraction.end() ? std::string() : cell_text(it->second)) + " |";
      }
    }
    out += "\n";
  }
  return out;
}

std::string error_breakdown(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<int, std::string, std::string>, textkit::WerReport> pooled;
  for (const auto& r : rows) {
    if (r.n_ref == 0) continue;
    auto& p = pooled[{regime_order(r.regime), r.regime, r.decode}];
    p += textkit::WerReport{r.n_ref, r.subs, r.dels, r.ins};
  }
  std::string out = "| regime | decode | words | subs | dels | ins | WER |\n|---|---|---|---|---|---|---|\n";
  for (const auto& [key, rep] : pooled) {
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", std::get<1>(key), std::get<2>(key), rep.n_ref,
                       rep.subs, rep.dels, rep.ins, format_percent(rep.wer()));
  }
  return out;
}

std::string render_report(const std::vector<ResultRow>& rows, const std::vector<DiffSample>& samples) {
  std::string out = "# WSP workbench report\n\n## Word error rate\n\n";
  out += wer_table(rows);
  out += "\n## Error types\n\nPooled over all cells and seeds of each regime.\n\n";
  out += error_breakdown(rows);
  const auto flagged = std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.flagged; });
  if (flagged > 0) {
    out += fmt::format("\n{} row(s) flagged (not converged or failed):\n\n", flagged);
    for (const auto& r : rows) {
      if (r.flagged) {
        out += fmt::format("- {} {} {:.2f} seed {} {}: {} {}\n", r.regime, r.mode, r.fraction, r.seed, r.decode,
                           format_percent(r.pooled_wer), r.note);
      }
    }
  }
  if (!samples.empty()) {
    out += "\n## Sample transcriptions\n";
    for (const auto& s : samples) {
      out += "\n" + s.title + "\n\n```\n" + render_diff(textkit::normalize(s.ref), textkit::normalize(s.hyp)) + "```\n";
    }
  }
  return out;
}

std::vector<ResultRow> rescore_from_hypotheses(const std::vector<ResultRow>& rows, const fs::path& work_dir) {
  std::vector<ResultRow> out = rows;
  for (auto& r : out) {
    const fs::path path = work_dir / "cells" / r.cell_id / fmt::format("hyps_{}.jsonl", r.decode);
    if (!fs::exists(path)) continue;
    std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
    for (const auto& h : read_hypotheses(path)) pairs.emplace_back(textkit::normalize(h.ref), textkit::normalize(h.hyp));
    const auto rep = textkit::corpus_wer(pairs);
    r.n_ref = rep.n_ref;
    r.subs = rep.subs;
    r.dels = rep.dels;
    r.ins = rep.ins;
    r.pooled_wer = rep.wer();
  }
  return out;
}

std::vector<DiffSample> pick_samples(const std::vector<ResultRow>& rows, const fs::path& work_dir,
                                     std::size_t per_cell) {
  if (per_cell == 0) return {};
  // First seed and highest fraction per (regime, mode).
  std::map<std::tuple<int, std::string, std::string>, const ResultRow*> chosen;
  for (const auto& r : rows) {
    if (r.decode != "lm") continue;
    const auto key = std::make_tuple(regime_order(r.regime), r.regime, r.mode);
    auto it = chosen.find(key);
    if (it == chosen.end() || std::tie(r.seed, it->second->fraction) < std::tie(it->second->seed, r.fraction)) {
      chosen[key] = &r;
    }
  }
  std::vector<DiffSample> out;
  for (const auto& [key, row] : chosen) {
    const fs::path path = work_dir / "cells" / row->cell_id / "hyps_lm.jsonl";
    if (!fs::exists(path)) continue;
    std::size_t taken = 0;
    for (const auto& h : read_hypotheses(path)) {
      if (taken == per_cell) break;
      if (h.ref == h.hyp) continue;
      out.push_back({fmt::format("{} {} {:.0f}%, seed {}, LM decoding, {}", row->regime, row->mode,
                                 100.0 * row->fraction, row->seed, h.id),
                     h.ref, h.hyp});
      ++taken;
    }
  }
  return out;
}

}  // namespace wsp::harness
