// src/textkit.cpp
#include "wsp/textkit.hpp"

#include <algorithm>
#include <cctype>

#include "wsp/error.hpp"

namespace wsp::textkit {

namespace {

bool is_word_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

}  // namespace

TokenSeq normalize(std::string_view raw) {
  TokenSeq tokens;
  std::string current;
  auto flush = [&]() {
    // Apostrophes only survive between word characters.
    std::size_t b = current.find_first_not_of('\'');
    std::size_t e = current.find_last_not_of('\'');
    if (b != std::string::npos) tokens.push_back(current.substr(b, e - b + 1));
    current.clear();
  };
  for (char raw_c : raw) {
    auto uc = static_cast<unsigned char>(raw_c);
    if (uc >= 0x80) continue;
    char c = static_cast<char>(std::tolower(uc));
    if (std::isspace(uc)) {
      flush();
    } else if (is_word_char(c) || c == '\'') {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

std::string join(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::size_t Alignment::count(OpKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(ops.begin(), ops.end(), [kind](const EditOp& op) { return op.kind == kind; }));
}

std::size_t Alignment::cost() const { return ops.size() - count(OpKind::match); }

TokenSeq Alignment::ref_side() const {
  TokenSeq out;
  for (const auto& op : ops) {
    if (op.kind != OpKind::insert) out.push_back(op.ref);
  }
  return out;
}

TokenSeq Alignment::hyp_side() const {
  TokenSeq out;
  for (const auto& op : ops) {
    if (op.kind != OpKind::del) out.push_back(op.hyp);
  }
  return out;
}

Alignment align(const TokenSeq& ref, const TokenSeq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t width = m + 1;
  std::vector<std::size_t> dist((n + 1) * width);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * width + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  Alignment out;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = at(i, j);
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i - 1, j - 1) == here) {
      out.ops.push_back({OpKind::match, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && at(i - 1, j - 1) + 1 == here) {
      out.ops.push_back({OpKind::substitute, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && at(i - 1, j) + 1 == here) {
      out.ops.push_back({OpKind::del, ref[i - 1], {}});
      --i;
    } else {
      out.ops.push_back({OpKind::insert, {}, hyp[j - 1]});
      --j;
    }
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

WerReport& WerReport::operator+=(const WerReport& other) {
  n_ref += other.n_ref;
  subs += other.subs;
  dels += other.dels;
  ins += other.ins;
  return *this;
}

namespace {

WerReport counts(const TokenSeq& ref, const TokenSeq& hyp) {
  Alignment a = align(ref, hyp);
  WerReport r;
  r.n_ref = ref.size();
  r.subs = a.count(OpKind::substitute);
  r.dels = a.count(OpKind::del);
  r.ins = a.count(OpKind::insert);
  return r;
}

}  // namespace

WerReport wer(const TokenSeq& ref, const TokenSeq& hyp) {
  if (ref.empty()) throw Error(Errc::empty_reference, "reference has no tokens");
  return counts(ref, hyp);
}

WerReport corpus_wer(const std::vector<std::pair<TokenSeq, TokenSeq>>& pairs) {
  WerReport total;
  for (const auto& [ref, hyp] : pairs) total += counts(ref, hyp);
  if (pairs.empty() || total.n_ref == 0) throw Error(Errc::empty_corpus, "no reference words to score");
  return total;
}

}  // namespace wsp::textkit
