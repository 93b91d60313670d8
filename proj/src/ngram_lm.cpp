// src/ngram_lm.cpp
#include "wsp/ngram_lm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wsp/charset.hpp"
#include "wsp/error.hpp"
#include "wsp/textkit.hpp"

namespace wsp::decode {

char lm_symbol_char(int symbol) {
  if (symbol == NgramLM::kBos) return '^';
  if (symbol == NgramLM::kEos) return '$';
  return charset::symbol(symbol);
}

int lm_symbol_from_char(char c) {
  if (c == '^') return NgramLM::kBos;
  if (c == '$') return NgramLM::kEos;
  auto idx = charset::index_of(c);
  if (!idx) throw Error(Errc::parse, std::string("unknown LM symbol '") + c + "'");
  return *idx;
}

NgramLM::NgramLM(int order, double k) : order_(order), k_(k) {
  if (order < 1 || order > kMaxOrder) throw Error(Errc::usage, "LM order must be in [1, 12]");
  if (!(k > 0.0)) throw Error(Errc::usage, "add-k constant must be > 0");
  const int bits = 5 * (order - 1);
  mask_ = bits == 0 ? 0 : (bits >= 64 ? ~0ULL : ((1ULL << bits) - 1));
}

NgramLM::State NgramLM::start() const {
  State s = 0;
  for (int i = 0; i + 1 < order_; ++i) s = advance(s, kBos);
  return s;
}

NgramLM::State NgramLM::advance(State state, int symbol) const {
  return ((state << 5) | static_cast<State>(symbol)) & mask_;
}

double NgramLM::prob(State state, int symbol) const {
  auto it = counts_.find(state);
  const double c = it == counts_.end() ? 0.0 : it->second.counts[static_cast<std::size_t>(symbol)];
  const double total = it == counts_.end() ? 0.0 : static_cast<double>(it->second.total);
  return (c + k_) / (total + k_ * kVocabSize);
}

double NgramLM::log_prob(State state, int symbol) const { return std::log(prob(state, symbol)); }

void NgramLM::add_count(State context, int symbol, std::uint32_t count) {
  Row& row = counts_[context & mask_];
  row.counts[static_cast<std::size_t>(symbol)] += count;
  row.total += count;
}

void NgramLM::add_sentence(const std::string& text) {
  State s = start();
  for (char c : text) {
    const int sym = lm_symbol_from_char(c);
    add_count(s, sym, 1);
    s = advance(s, sym);
  }
  add_count(s, kEos, 1);
}

std::vector<int> NgramLM::context_symbols(State state) const {
  std::vector<int> out(static_cast<std::size_t>(order_ - 1));
  for (int i = order_ - 2; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(state & 31u);
    state >>= 5;
  }
  return out;
}

NgramLM::State NgramLM::make_state(const std::vector<int>& symbols) const {
  State s = start();
  for (int sym : symbols) s = advance(s, sym);
  return s;
}

double NgramLM::sentence_log_prob(const std::string& text) const {
  State s = start();
  double lp = 0.0;
  for (char c : text) {
    const int sym = lm_symbol_from_char(c);
    lp += log_prob(s, sym);
    s = advance(s, sym);
  }
  return lp + log_prob(s, kEos);
}

void NgramLM::save(const std::filesystem::path& path) const {
  std::vector<std::string> lines;
  for (const auto& [ctx, row] : counts_) {
    std::string context;
    for (int sym : context_symbols(ctx)) context.push_back(lm_symbol_char(sym));
    for (int sym = 0; sym < kVocabSize; ++sym) {
      const auto c = row.counts[static_cast<std::size_t>(sym)];
      if (c == 0) continue;
      lines.push_back(context + '\t' + lm_symbol_char(sym) + '\t' + std::to_string(c));
    }
  }
  std::sort(lines.begin(), lines.end());
  char kbuf[64];
  auto res = std::to_chars(kbuf, kbuf + sizeof(kbuf), k_);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << "wsplm v1 n=" << order_ << " k=" << std::string(kbuf, res.ptr) << '\n';
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

NgramLM NgramLM::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open LM file " + path.string());
  std::string header;
  std::getline(in, header);
  int order = 0;
  double k = 0.0;
  {
    const std::string prefix = "wsplm v1 n=";
    const auto kpos = header.find(" k=");
    if (header.rfind(prefix, 0) != 0 || kpos == std::string::npos) {
      throw Error(Errc::bad_magic, path.string() + ": missing 'wsplm v1' header");
    }
    const std::string n_str = header.substr(prefix.size(), kpos - prefix.size());
    const std::string k_str = header.substr(kpos + 3);
    auto r1 = std::from_chars(n_str.data(), n_str.data() + n_str.size(), order);
    auto r2 = std::from_chars(k_str.data(), k_str.data() + k_str.size(), k);
    if (r1.ec != std::errc() || r2.ec != std::errc()) throw Error(Errc::parse, path.string() + ": bad header '" + header + "'");
  }
  NgramLM lm(order, k);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || t2 != t1 + 2 || t1 != static_cast<std::size_t>(order - 1)) {
      throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    std::vector<int> ctx;
    for (std::size_t i = 0; i < t1; ++i) ctx.push_back(lm_symbol_from_char(line[i]));
    State s = 0;
    for (int sym : ctx) s = lm.advance(s, sym);
    std::uint32_t count = 0;
    auto r = std::from_chars(line.data() + t2 + 1, line.data() + line.size(), count);
    if (r.ec != std::errc()) throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": bad count");
    lm.add_count(s, lm_symbol_from_char(line[t1 + 1]), count);
  }
  return lm;
}

bool NgramLM::operator==(const NgramLM& other) const {
  if (order_ != other.order_ || k_ != other.k_ || counts_.size() != other.counts_.size()) return false;
  for (const auto& [ctx, row] : counts_) {
    auto it = other.counts_.find(ctx);
    if (it == other.counts_.end() || it->second.counts != row.counts) return false;
  }
  return true;
}

NgramLM train_lm(const std::vector<TokenSeq>& texts, int order, double k) {
  NgramLM lm(order, k);
  std::size_t used = 0;
  for (const auto& t : texts) {
    if (t.empty()) continue;
    lm.add_sentence(textkit::join(t));
    ++used;
  }
  if (used == 0) throw Error(Errc::empty_corpus, "no text to train the language model on");
  return lm;
}

}  // namespace wsp::decode
