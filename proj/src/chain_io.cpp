#include "bfactor/chain_io.hpp"

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace bfactor {

namespace {

constexpr char kMagic[4] = {'B', 'F', 'C', 'H'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

template <typename T>
void write_raw(std::FILE* f, const T* data, std::size_t count) {
  if (std::fwrite(data, sizeof(T), count, f) != count) {
    throw std::runtime_error("short write to draw container");
  }
}

template <typename T>
void read_raw(std::FILE* f, T* data, std::size_t count) {
  if (std::fread(data, sizeof(T), count, f) != count) {
    throw std::runtime_error("short read from draw container");
  }
}

}  // namespace

void write_bfch(const std::string& path, const BfchArray& array) {
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  write_raw(f.get(), kMagic, 4);
  write_raw(f.get(), &kVersion, 1);
  const std::uint32_t ndims = static_cast<std::uint32_t>(array.dims.size());
  write_raw(f.get(), &ndims, 1);
  write_raw(f.get(), array.dims.data(), array.dims.size());
  write_raw(f.get(), &array.draws, 1);
  std::uint64_t per_draw = 1;
  for (auto d : array.dims) per_draw *= d;
  if (array.data.size() != per_draw * array.draws) {
    throw std::runtime_error("draw container size mismatch for '" + path +
                             "'");
  }
  write_raw(f.get(), array.data.data(), array.data.size());
}

BfchArray read_bfch(const std::string& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  char magic[4];
  read_raw(f.get(), magic, 4);
  if (magic[0] != 'B' || magic[1] != 'F' || magic[2] != 'C' ||
      magic[3] != 'H') {
    throw std::runtime_error("'" + path + "' is not a draw container");
  }
  std::uint32_t version = 0;
  read_raw(f.get(), &version, 1);
  if (version != kVersion) {
    throw std::runtime_error("unsupported draw container version");
  }
  std::uint32_t ndims = 0;
  read_raw(f.get(), &ndims, 1);
  if (ndims > 8) throw std::runtime_error("implausible dimension count");
  BfchArray array;
  array.dims.resize(ndims);
  read_raw(f.get(), array.dims.data(), ndims);
  read_raw(f.get(), &array.draws, 1);
  std::uint64_t per_draw = 1;
  for (auto d : array.dims) per_draw *= d;
  array.data.resize(per_draw * array.draws);
  read_raw(f.get(), array.data.data(), array.data.size());
  return array;
}

}  // namespace bfactor
