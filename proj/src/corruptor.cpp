// src/corruptor.cpp
#include "wsp/corruptor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wsp/charset.hpp"
#include "wsp/error.hpp"
#include "wsp/textkit.hpp"

namespace wsp::corruptor {

const char* to_string(Mode mode) { return mode == Mode::full ? "full" : "random"; }

Mode parse_mode(std::string_view name) {
  if (name == "random") return Mode::random;
  if (name == "full") return Mode::full;
  throw Error(Errc::usage, "unknown corruption mode '" + std::string(name) + "'");
}

void CorruptionConfig::validate() const {
  for (double p : {p_delete, p_substitute, p_repeat, p_timestamp, substitute_soundalike_ratio}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::usage, "corruption probabilities must lie in [0, 1]");
  }
  if (edge_words_min < 0 || edge_words_min > edge_words_max) {
    throw Error(Errc::usage, "edge word counts must satisfy 0 <= min <= max");
  }
}

std::string phonetic_key(std::string_view word) {
  // Index by letter: 0 = vowel-like separator, -1 = h/w (transparent).
  static constexpr int kCode[26] = {0, 1, 2, 3, 0, 1, 2, -1, 0, 2, 2, 4, 5,
                                    5, 0, 1, 2, 6, 2, 3, 0, 1, -1, 2, 0, 2};
  std::string key;
  int prev = 0;
  for (char c : word) {
    if (c == '\'') continue;
    if (!charset::is_letter(c)) throw Error(Errc::invalid_charset, "phonetic_key: '" + std::string(word) + "'");
    const int code = kCode[c - 'a'];
    if (key.empty()) {
      key.push_back(static_cast<char>(c - 'a' + 'A'));
      prev = code;
      continue;
    }
    if (code == -1) continue;
    if (code == 0) {
      prev = 0;
      continue;
    }
    if (code != prev && key.size() < 4) key.push_back(static_cast<char>('0' + code));
    prev = code;
  }
  if (key.empty()) throw Error(Errc::invalid_charset, "phonetic_key: no letters in '" + std::string(word) + "'");
  key.resize(4, '0');
  return key;
}

int damerau_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[n][m];
}

namespace {

// A word is usable as a replacement only if normalization leaves it intact,
// so corrupted text stays a fixed point of textkit::normalize.
bool is_stable_word(const std::string& w) {
  if (w.empty() || !charset::is_valid(w) || w.find(' ') != std::string::npos) return false;
  if (std::none_of(w.begin(), w.end(), charset::is_letter)) return false;
  TokenSeq t = textkit::normalize(w);
  return t.size() == 1 && t[0] == w;
}

char first_letter(const std::string& w) {
  for (char c : w) {
    if (charset::is_letter(c)) return c;
  }
  return '\0';
}

}  // namespace

NeighborIndex::NeighborIndex(const std::vector<std::string>& vocab) {
  for (const auto& w : vocab) {
    if (is_stable_word(w)) members_.insert(w);
  }
  vocab_.assign(members_.begin(), members_.end());
  for (const auto& w : vocab_) {
    buckets_[phonetic_key(w)].push_back(w);
    by_prefix_length_[{first_letter(w), w.size()}].push_back(w);
  }
}

bool NeighborIndex::contains(const std::string& word) const { return members_.count(word) > 0; }

std::vector<std::string> NeighborIndex::soundalikes(const std::string& word) const {
  std::vector<std::string> out;
  if (!is_stable_word(word)) return out;
  auto it = buckets_.find(phonetic_key(word));
  if (it == buckets_.end()) return out;
  for (const auto& w : it->second) {
    if (w != word) out.push_back(w);
  }
  return out;
}

std::vector<std::string> NeighborIndex::spelled_likes(const std::string& word) const {
  std::vector<std::string> out;
  const char first = first_letter(word);
  if (first == '\0') return out;
  const std::size_t lo = word.size() > 2 ? word.size() - 2 : 0;
  for (std::size_t len = lo; len <= word.size() + 2; ++len) {
    auto it = by_prefix_length_.find({first, len});
    if (it == by_prefix_length_.end()) continue;
    for (const auto& w : it->second) {
      if (w != word && damerau_levenshtein(w, word) <= 2) out.push_back(w);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> mutations(const std::string& word) {
  std::vector<std::string> raw;
  for (std::size_t i = 0; i < word.size(); ++i) {
    raw.push_back(word.substr(0, i + 1) + word.substr(i));  // doubled letter
  }
  for (std::size_t i = 0; i < word.size() && word.size() > 1; ++i) {
    raw.push_back(word.substr(0, i) + word.substr(i + 1));  // dropped letter
  }
  for (std::size_t i = 0; i + 1 < word.size(); ++i) {
    if (word[i] == word[i + 1]) continue;
    std::string s = word;
    std::swap(s[i], s[i + 1]);
    raw.push_back(s);
  }
  raw.push_back(word + "e");
  raw.push_back(word + "s");
  if (word.size() > 1 && (word.back() == 'e' || word.back() == 's')) raw.push_back(word.substr(0, word.size() - 1));

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& s : raw) {
    if (s != word && is_stable_word(s) && seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> neighbors(const std::string& word, const NeighborIndex& index, NeighborKind kind) {
  auto first = kind == NeighborKind::soundalike ? index.soundalikes(word) : index.spelled_likes(word);
  if (!first.empty()) return first;
  auto second = kind == NeighborKind::soundalike ? index.spelled_likes(word) : index.soundalikes(word);
  if (!second.empty()) return second;
  auto fallback = mutations(word);
  if (fallback.empty()) fallback.push_back(word + word);
  return fallback;
}

namespace {

// Drops excluded words from `cands` unless that would leave nothing.
std::vector<std::string> without(std::vector<std::string> cands, const std::set<std::string>& exclude) {
  std::vector<std::string> kept;
  for (auto& c : cands) {
    if (!exclude.count(c)) kept.push_back(c);
  }
  return kept.empty() ? cands : kept;
}

// In full mode `exclude` holds the original sentence so that no replacement
// can coincide with a word the speaker actually said.
std::string substitute(const std::string& word, const CorruptionConfig& cfg, const NeighborIndex& index, Rng& rng,
                       const std::set<std::string>& exclude) {
  const NeighborKind kind =
      bernoulli(rng, cfg.substitute_soundalike_ratio) ? NeighborKind::soundalike : NeighborKind::spelled_like;
  auto cands = neighbors(word, index, kind);
  if (!exclude.empty()) {
    cands = without(std::move(cands), exclude);
    if (exclude.count(cands.front())) cands = without(mutations(word), exclude);
  }
  return cands[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cands.size()) - 1))];
}

std::string draw_word(const NeighborIndex& index, const TokenSeq& fallback, Rng& rng,
                      const std::set<std::string>& exclude) {
  const auto& pool = index.vocab().empty() ? fallback : index.vocab();
  std::string w = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
  if (exclude.count(w)) w = substitute(w, CorruptionConfig{}, index, rng, exclude);
  return w;
}

}  // namespace

Utterance corrupt_utterance(const Utterance& utt, const CorruptionConfig& cfg, const NeighborIndex& index, Rng& rng,
                            CorruptionTrace* trace) {
  cfg.validate();
  CorruptionTrace local;
  CorruptionTrace& tr = trace ? *trace : local;
  tr = CorruptionTrace{};
  tr.words = utt.tokens.size();

  std::set<std::string> exclude;
  if (cfg.mode == Mode::full) exclude.insert(utt.tokens.begin(), utt.tokens.end());

  Utterance out = utt;
  out.tokens.clear();
  for (const auto& word : utt.tokens) {
    if (bernoulli(rng, cfg.p_delete)) {
      ++tr.deleted;
      continue;
    }
    ++tr.survivors;
    std::string w = word;
    if (cfg.mode == Mode::full || bernoulli(rng, cfg.p_substitute)) {
      w = substitute(word, cfg, index, rng, exclude);
      ++tr.substituted;
    }
    out.tokens.push_back(w);
    if (bernoulli(rng, cfg.p_repeat)) {
      out.tokens.push_back(w);
      ++tr.repeated;
    }
  }

  if (bernoulli(rng, cfg.p_timestamp)) {
    tr.timestamp = true;
    // head only, tail only, or both, equally likely
    const int which = uniform_int(rng, 0, 2);
    const bool edges[2] = {which != 1, which != 0};
    for (int e = 0; e < 2; ++e) {
      if (!edges[e]) continue;
      const bool drop = bernoulli(rng, 0.5);
      const int k = uniform_int(rng, cfg.edge_words_min, cfg.edge_words_max);
      if (drop) {
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), out.tokens.size());
        if (e == 0) {
          out.tokens.erase(out.tokens.begin(), out.tokens.begin() + static_cast<long>(n));
        } else {
          out.tokens.resize(out.tokens.size() - n);
        }
      } else {
        TokenSeq extra;
        for (int i = 0; i < k; ++i) extra.push_back(draw_word(index, utt.tokens, rng, exclude));
        out.tokens.insert(e == 0 ? out.tokens.begin() : out.tokens.end(), extra.begin(), extra.end());
      }
    }
  }

  if (cfg.mode == Mode::random && cfg.enforce_min_mistake && out.tokens == utt.tokens && !out.tokens.empty()) {
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(out.tokens.size()) - 1));
    out.tokens[i] = substitute(out.tokens[i], cfg, index, rng, exclude);
    tr.forced_substitution = true;
  }

  if (out.tokens.empty() && !utt.tokens.empty()) {
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(utt.tokens.size()) - 1));
    out.tokens.push_back(substitute(utt.tokens[i], cfg, index, rng, exclude));
    tr.degenerate = true;
  }
  return out;
}

std::vector<std::size_t> select_for_corruption(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(Errc::usage, "corruption fraction must lie in [0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = keyed_stream(seed, "corruption-selection");
  std::shuffle(order.begin(), order.end(), rng);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  order.resize(std::min(count, n));
  std::sort(order.begin(), order.end());
  return order;
}

CorruptedCorpus corrupt_corpus(const Corpus& corpus, const CorruptionConfig& cfg, double fraction, std::uint64_t seed,
                               const NeighborIndex& index) {
  cfg.validate();
  CorruptedCorpus out;
  out.utterances = corpus;
  out.corrupted.assign(corpus.size(), false);
  for (std::size_t i : select_for_corruption(corpus.size(), fraction, seed)) {
    if (corpus[i].tokens.empty()) continue;
    Rng rng = keyed_stream(seed, "corrupt:" + corpus[i].id);
    out.utterances[i] = corrupt_utterance(corpus[i], cfg, index, rng);
    out.corrupted[i] = true;
  }
  return out;
}

}  // namespace wsp::corruptor
