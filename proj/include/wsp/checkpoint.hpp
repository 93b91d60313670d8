// wsp/checkpoint.hpp
//
// Model checkpoints, little-endian:
//   "WSPM" | u32 version=1 | u32 context | u32 dim | u32 hidden | u32 n_out
//   | W1 | b1 | W2 | b2   (float32, row-major)
#pragma once

#include <filesystem>

#include "wsp/model.hpp"

namespace wsp::acoustic {

inline constexpr char kCheckpointMagic[4] = {'W', 'S', 'P', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const AcousticModel& model);
AcousticModel load_checkpoint(const std::filesystem::path& path);

// Parameters rounded through float32, i.e. what a save/load cycle yields.
AcousticModel round_to_float(const AcousticModel& model);

}  // namespace wsp::acoustic
