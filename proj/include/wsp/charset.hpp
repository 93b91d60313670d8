// wsp/charset.hpp
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wsp::charset {

// 26 letters, space, apostrophe. Indices are stable across the workbench.
inline constexpr std::string_view kSymbols = "abcdefghijklmnopqrstuvwxyz '";
inline constexpr int kSize = 28;

// Model output layer: index 0 is the CTC blank, symbol i maps to i + 1.
inline constexpr int kBlank = 0;
inline constexpr int kNumOutputs = kSize + 1;

std::optional<int> index_of(char c);
bool is_valid(std::string_view text);
bool is_letter(char c);

inline char symbol(int index) { return kSymbols[static_cast<std::size_t>(index)]; }

inline int to_output(int symbol_index) { return symbol_index + 1; }
inline int from_output(int output_index) { return output_index - 1; }

// Text -> model output indices (1..28). Throws invalid_charset.
std::vector<int> encode(std::string_view text);
// Output indices (no blanks) -> text.
std::string decode(const std::vector<int>& outputs);

}  // namespace wsp::charset
