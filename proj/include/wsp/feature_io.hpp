// wsp/feature_io.hpp
//
// Binary feature files, little-endian:
//   "WSPF" | u32 version=1 | u32 T | u32 dim | T*dim float32, row-major
#pragma once

#include <filesystem>
#include <optional>

#include "wsp/synth.hpp"

namespace wsp::synth {

inline constexpr char kFeatureMagic[4] = {'W', 'S', 'P', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_features(const std::filesystem::path& path, const FrameMatrix& frames);

// Errors: bad_magic, truncated (including T == 0), dimension_mismatch when
// `expected_dim` is given and differs from the file.
FrameMatrix read_features(const std::filesystem::path& path, std::optional<int> expected_dim = std::nullopt);

}  // namespace wsp::synth
