// src/charset.cpp
#include "wsp/charset.hpp"

#include "wsp/error.hpp"

namespace wsp::charset {

std::optional<int> index_of(char c) {
  if (c >= 'a' && c <= 'z') return c - 'a';
  if (c == ' ') return 26;
  if (c == '\'') return 27;
  return std::nullopt;
}

bool is_letter(char c) { return c >= 'a' && c <= 'z'; }

bool is_valid(std::string_view text) {
  for (char c : text) {
    if (!index_of(c)) return false;
  }
  return true;
}

std::vector<int> encode(std::string_view text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) {
    auto idx = index_of(c);
    if (!idx) throw Error(Errc::invalid_charset, "character outside charset in '" + std::string(text) + "'");
    out.push_back(to_output(*idx));
  }
  return out;
}

std::string decode(const std::vector<int>& outputs) {
  std::string out;
  out.reserve(outputs.size());
  for (int o : outputs) out.push_back(symbol(from_output(o)));
  return out;
}

}  // namespace wsp::charset
