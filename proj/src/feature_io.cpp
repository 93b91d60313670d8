// src/feature_io.cpp
#include "wsp/feature_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "wsp/error.hpp"

namespace wsp::synth {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

std::uint32_t get_u32(const std::vector<char>& buf, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, buf.data() + offset, sizeof(v));
  return v;
}

}  // namespace

void write_features(const std::filesystem::path& path, const FrameMatrix& frames) {
  if (frames.rows() < 1 || frames.cols() < 1) {
    throw Error(Errc::dimension_mismatch, path.string() + ": refusing to write an empty feature matrix");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out.write(kFeatureMagic, 4);
  put_u32(out, kFeatureVersion);
  put_u32(out, static_cast<std::uint32_t>(frames.rows()));
  put_u32(out, static_cast<std::uint32_t>(frames.cols()));
  out.write(reinterpret_cast<const char*>(frames.data()),
            static_cast<std::streamsize>(frames.size() * sizeof(float)));
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

FrameMatrix read_features(const std::filesystem::path& path, std::optional<int> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kFeatureMagic, 4) != 0) {
    throw Error(Errc::bad_magic, path.string() + " is not a WSPF feature file");
  }
  if (buf.size() < 16) throw Error(Errc::truncated, path.string() + ": header is incomplete");
  const std::uint32_t version = get_u32(buf, 4);
  if (version != kFeatureVersion) {
    throw Error(Errc::bad_magic, path.string() + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t frames = get_u32(buf, 8);
  const std::uint32_t dim = get_u32(buf, 12);
  if (frames == 0) throw Error(Errc::truncated, path.string() + ": zero frames");
  if (dim == 0) throw Error(Errc::dimension_mismatch, path.string() + ": zero feature dimension");
  if (expected_dim && static_cast<int>(dim) != *expected_dim) {
    throw Error(Errc::dimension_mismatch,
                path.string() + ": dim " + std::to_string(dim) + ", expected " + std::to_string(*expected_dim));
  }
  const std::size_t payload = static_cast<std::size_t>(frames) * dim * sizeof(float);
  if (buf.size() < 16 + payload) throw Error(Errc::truncated, path.string() + ": payload is short");
  if (buf.size() > 16 + payload) throw Error(Errc::dimension_mismatch, path.string() + ": trailing bytes after payload");
  FrameMatrix out(frames, dim);
  std::memcpy(out.data(), buf.data() + 16, payload);
  return out;
}

}  // namespace wsp::synth
