// src/checkpoint.cpp
#include "wsp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "wsp/error.hpp"

namespace wsp::acoustic {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

namespace {

// Eigen storage is column-major; the file is row-major.
template <typename Fn>
void for_each_row_major(const Eigen::MatrixXd& m, Fn&& fn) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) fn(m(r, c));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AcousticModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<char> buf(kCheckpointMagic, kCheckpointMagic + 4);
  auto put_u32 = [&](std::uint32_t v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.insert(buf.end(), p, p + 4);
  };
  auto put_f32 = [&](double v) {
    const float f = static_cast<float>(v);
    const char* p = reinterpret_cast<const char*>(&f);
    buf.insert(buf.end(), p, p + 4);
  };
  put_u32(kCheckpointVersion);
  put_u32(static_cast<std::uint32_t>(model.shape.context));
  put_u32(static_cast<std::uint32_t>(model.shape.dim));
  put_u32(static_cast<std::uint32_t>(model.shape.hidden));
  put_u32(static_cast<std::uint32_t>(model.shape.n_out));
  for_each_row_major(model.params.w1, put_f32);
  for (Eigen::Index i = 0; i < model.params.b1.size(); ++i) put_f32(model.params.b1[i]);
  for_each_row_major(model.params.w2, put_f32);
  for (Eigen::Index i = 0; i < model.params.b2.size(); ++i) put_f32(model.params.b2[i]);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

AcousticModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_checkpoint, "cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
    throw Error(Errc::bad_magic, path.string() + " is not a WSPM checkpoint");
  }
  if (buf.size() < 24) throw Error(Errc::truncated, path.string() + ": header is incomplete");
  std::size_t pos = 4;
  auto get_u32 = [&]() {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != kCheckpointVersion) throw Error(Errc::bad_magic, path.string() + ": unsupported version");
  ModelShape shape;
  shape.context = static_cast<int>(get_u32());
  shape.dim = static_cast<int>(get_u32());
  shape.hidden = static_cast<int>(get_u32());
  shape.n_out = static_cast<int>(get_u32());
  AcousticModel model = AcousticModel::zeros(shape);
  if (buf.size() != 24 + 4 * model.params.size()) {
    throw Error(Errc::truncated, path.string() + ": parameter payload size does not match header");
  }
  auto get_f32 = [&]() {
    float f;
    std::memcpy(&f, buf.data() + pos, 4);
    pos += 4;
    return static_cast<double>(f);
  };
  for (Eigen::Index r = 0; r < model.params.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < model.params.w1.cols(); ++c) model.params.w1(r, c) = get_f32();
  for (Eigen::Index i = 0; i < model.params.b1.size(); ++i) model.params.b1[i] = get_f32();
  for (Eigen::Index r = 0; r < model.params.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < model.params.w2.cols(); ++c) model.params.w2(r, c) = get_f32();
  for (Eigen::Index i = 0; i < model.params.b2.size(); ++i) model.params.b2[i] = get_f32();
  return model;
}

AcousticModel round_to_float(const AcousticModel& model) {
  AcousticModel out = model;
  out.params.for_each([](double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = static_cast<double>(static_cast<float>(d[i]));
  });
  return out;
}

}  // namespace wsp::acoustic
