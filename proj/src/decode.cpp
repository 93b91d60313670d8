// src/decode.cpp
#include "wsp/decode.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "wsp/charset.hpp"
#include "wsp/ctc.hpp"
#include "wsp/error.hpp"
#include "wsp/textkit.hpp"

namespace wsp::decode {

using acoustic::kNegInf;
using acoustic::log_add;

std::string collapse(const std::vector<int>& path) {
  std::string out;
  int prev = -1;
  for (int sym : path) {
    if (sym != prev && sym != charset::kBlank) out.push_back(charset::symbol(charset::from_output(sym)));
    prev = sym;
  }
  return out;
}

std::vector<int> best_path(const Eigen::MatrixXd& log_post) {
  std::vector<int> path(static_cast<std::size_t>(log_post.rows()));
  for (Eigen::Index t = 0; t < log_post.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < log_post.cols(); ++k) {
      if (log_post(t, k) > log_post(t, best)) best = k;
    }
    path[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return path;
}

TokenSeq greedy_decode(const Eigen::MatrixXd& log_post) { return textkit::normalize(collapse(best_path(log_post))); }

void DecoderConfig::validate() const {
  if (beam_width < 1) throw Error(Errc::usage, "beam_width must be >= 1");
  if (lm_weight < 0) throw Error(Errc::usage, "lm_weight must be >= 0");
}

namespace {

// Prefix tree node; the root is the empty prefix.
struct Node {
  int parent = -1;
  int symbol = 0;  // output index of the last character, 0 at the root
  int depth = 0;
  NgramLM::State lm_state = 0;
  double fusion = 0.0;
};

class PrefixTree {
 public:
  PrefixTree(const NgramLM* lm, const DecoderConfig& cfg) : lm_(lm), cfg_(cfg) {
    Node root;
    root.lm_state = lm ? lm->start() : 0;
    nodes_.push_back(root);
  }

  int child(int parent, int symbol) {
    const auto key = (static_cast<std::uint64_t>(parent) << 5) | static_cast<std::uint64_t>(symbol);
    auto [it, inserted] = children_.try_emplace(key, static_cast<int>(nodes_.size()));
    if (inserted) {
      const Node& p = nodes_[static_cast<std::size_t>(parent)];
      Node n;
      n.parent = parent;
      n.symbol = symbol;
      n.depth = p.depth + 1;
      n.fusion = p.fusion + cfg_.insertion_bonus;
      if (lm_) {
        const int lm_sym = charset::from_output(symbol);
        n.fusion += cfg_.lm_weight * lm_->log_prob(p.lm_state, lm_sym);
        n.lm_state = lm_->advance(p.lm_state, lm_sym);
      }
      nodes_.push_back(n);
    }
    return it->second;
  }

  const Node& operator[](int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  double final_fusion(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return lm_ ? n.fusion + cfg_.lm_weight * lm_->log_prob(n.lm_state, NgramLM::kEos) : n.fusion;
  }

  std::vector<int> label(int id) const {
    std::vector<int> out;
    for (; id > 0; id = nodes_[static_cast<std::size_t>(id)].parent) out.push_back(nodes_[static_cast<std::size_t>(id)].symbol);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  const NgramLM* lm_;
  const DecoderConfig& cfg_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, int> children_;
};

struct Mass {
  double blank = kNegInf;
  double non_blank = kNegInf;
  double total() const { return log_add(blank, non_blank); }
};

}  // namespace

std::vector<Hypothesis> beam_search(const Eigen::MatrixXd& log_post, const NgramLM* lm, const DecoderConfig& cfg) {
  cfg.validate();
  PrefixTree tree(lm, cfg);
  std::vector<std::pair<int, Mass>> beam{{0, Mass{0.0, kNegInf}}};
  // Per-node mass for the frame being built, indexed by node id.
  std::vector<Mass> next;
  std::vector<char> live;
  std::vector<int> touched;
  std::vector<std::pair<double, int>> ranked;
  auto slot = [&](int id) -> Mass& {
    const auto i = static_cast<std::size_t>(id);
    if (i >= next.size()) {
      next.resize(tree.size() * 2);
      live.resize(tree.size() * 2, 0);
    }
    if (!live[i]) {
      live[i] = 1;
      touched.push_back(id);
    }
    return next[i];
  };

  for (Eigen::Index t = 0; t < log_post.rows(); ++t) {
    touched.clear();
    const Eigen::RowVectorXd row = log_post.row(t);
    for (const auto& [id, mass] : beam) {
      const double total = mass.total();
      const int sym = tree[id].symbol;
      {
        Mass& stay = slot(id);
        stay.blank = log_add(stay.blank, total + row(charset::kBlank));
        if (id != 0) stay.non_blank = log_add(stay.non_blank, mass.non_blank + row(sym));
      }
      for (Eigen::Index c = 1; c < row.size(); ++c) {
        const double y = row(c);
        if (y < cfg.prune_logp || y == kNegInf) continue;
        const int kid = tree.child(id, static_cast<int>(c));
        const double from = (id != 0 && sym == c) ? mass.blank : total;
        Mass& ext = slot(kid);
        ext.non_blank = log_add(ext.non_blank, from + y);
      }
    }
    ranked.clear();
    for (int id : touched) {
      const double total = next[static_cast<std::size_t>(id)].total();
      if (total != kNegInf) ranked.emplace_back(total + tree[id].fusion, id);
    }
    auto better = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    };
    const auto keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(cfg.beam_width));
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(keep), ranked.end(), better);
    ranked.resize(keep);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    beam.clear();
    for (const auto& r : ranked) beam.emplace_back(r.second, next[static_cast<std::size_t>(r.second)]);
    for (int id : touched) {
      next[static_cast<std::size_t>(id)] = Mass{};
      live[static_cast<std::size_t>(id)] = 0;
    }
  }

  std::vector<Hypothesis> out;
  out.reserve(beam.size());
  for (const auto& [id, mass] : beam) {
    out.push_back(Hypothesis{tree.label(id), mass.total(), tree.final_fusion(id)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.score() > b.score(); });
  return out;
}

TokenSeq beam_decode(const Eigen::MatrixXd& log_post, const NgramLM* lm, const DecoderConfig& cfg) {
  auto hyps = beam_search(log_post, lm, cfg);
  if (hyps.empty()) return {};
  return textkit::normalize(charset::decode(hyps.front().label));
}

double fusion_score(const Eigen::MatrixXd& log_post, const std::vector<int>& label, const NgramLM* lm,
                    const DecoderConfig& cfg) {
  if (static_cast<Eigen::Index>(acoustic::ctc_min_frames(label)) > log_post.rows()) return kNegInf;
  double acoustic_lp = acoustic::ctc_trellis(log_post, label).forward_log_likelihood;
  double fusion = cfg.insertion_bonus * static_cast<double>(label.size());
  if (lm) {
    std::string text = charset::decode(label);
    fusion += cfg.lm_weight * lm->sentence_log_prob(text);
  }
  return acoustic_lp + fusion;
}

}  // namespace wsp::decode
