#ifndef BFACTOR_CHAIN_IO_HPP
#define BFACTOR_CHAIN_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace bfactor {

// Binary draw container: magic "BFCH", u32 version, u32 ndims, u64 dims[],
// u64 draw_count, then draw_count * prod(dims) little-endian f64 values in
// storage order (draw-major). Requires a little-endian host.
struct BfchArray {
  std::vector<std::uint64_t> dims;  // per-draw shape
  std::uint64_t draws = 0;
  std::vector<double> data;
};

void write_bfch(const std::string& path, const BfchArray& array);
BfchArray read_bfch(const std::string& path);

}  // namespace bfactor

#endif  // BFACTOR_CHAIN_IO_HPP
