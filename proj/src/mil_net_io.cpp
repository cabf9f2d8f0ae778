#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "cogdist/mil_net.hpp"

namespace cogdist {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'M', 'V', 'G', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::ostream& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.put(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!in) throw Error(ErrorKind::Io, "truncated checkpoint");
  U bits = 0;
  for (std::size_t i = sizeof(U); i-- > 0;) bits = static_cast<U>(bits << 8 | buf[i]);
  return bits;
}

std::vector<std::size_t> expected_sizes(const ModelDims& d) {
  const auto he = static_cast<std::size_t>(d.hidden_dim * d.embed_dim);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(2 * d.views), he);
  sizes.push_back(he);
  sizes.push_back(static_cast<std::size_t>(2 * d.hidden_dim * d.hidden_dim));
  sizes.push_back(static_cast<std::size_t>(d.classes * d.hidden_dim));
  return sizes;
}

}  // namespace

void write_checkpoint_file(const fs::path& path, const CheckpointHeader& header,
                           const std::vector<std::vector<float>>& row_major) {
  const auto sizes = expected_sizes(header.dims);
  if (row_major.size() != sizes.size()) throw Error(ErrorKind::ShapeMismatch, "checkpoint matrix count");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (row_major[i].size() != sizes[i]) throw Error(ErrorKind::ShapeMismatch, "checkpoint matrix size");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  for (auto v : {header.dims.embed_dim, header.dims.hidden_dim, header.dims.views, header.dims.classes}) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  put_le<std::uint64_t>(out, header.seed);
  put_le<std::uint32_t>(out, header.epoch);
  for (const auto& blob : row_major) {
    for (float f : blob) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof bits);
      put_le(out, bits);
    }
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::pair<CheckpointHeader, std::vector<std::vector<float>>> read_checkpoint_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::InvalidInput, path.string() + ": not a checkpoint");
  if (get_le<std::uint32_t>(in) != kVersion) throw Error(ErrorKind::InvalidInput, path.string() + ": unsupported version");
  CheckpointHeader h;
  h.dims.embed_dim = get_le<std::uint32_t>(in);
  h.dims.hidden_dim = get_le<std::uint32_t>(in);
  h.dims.views = get_le<std::uint32_t>(in);
  h.dims.classes = get_le<std::uint32_t>(in);
  h.seed = get_le<std::uint64_t>(in);
  h.epoch = get_le<std::uint32_t>(in);
  std::vector<std::vector<float>> blobs;
  for (std::size_t n : expected_sizes(h.dims)) {
    std::vector<float> blob(n);
    for (auto& f : blob) {
      const auto bits = get_le<std::uint32_t>(in);
      std::memcpy(&f, &bits, sizeof f);
    }
    blobs.push_back(std::move(blob));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::InvalidInput, path.string() + ": trailing bytes");
  return {h, std::move(blobs)};
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,train_loss,val_loss\n";
  for (const auto& r : history) out += fmt::format("{},{:.8g},{:.10g},{:.10g}\n", r.epoch, r.lr, r.train_loss, r.val_loss);
  return out;
}

}  // namespace cogdist
