#ifndef BFACTOR_RNG_HPP
#define BFACTOR_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace bfactor {

// Counter-style stream construction: every (seed, stream_id) pair owns an
// independent xoshiro256++ state derived through splitmix64, so parallel work
// items can be keyed by index instead of sharing a generator.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t z = mix64(seed + 0x9e3779b97f4a7c15ull);
    z ^= mix64(stream_id + 0xbf58476d1ce4e5b9ull);
    for (auto& w : state_) {
      z += 0x9e3779b97f4a7c15ull;
      w = mix64(z);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  // Stream keyed by (seed, sweep, block, index); used to give each parallel
  // work item its own generator so results do not depend on thread count.
  static RngStream keyed(std::uint64_t seed, std::uint64_t sweep,
                         std::uint64_t block, std::uint64_t index) {
    std::uint64_t id = mix64(sweep + 0x2545f4914f6cdd1dull);
    id = mix64(id ^ (block + 0x9e3779b97f4a7c15ull));
    id = mix64(id ^ (index + 0xd1342543de82ef95ull));
    return RngStream(seed, id);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); safe as a log() argument.
  double next_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = next_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  // splitmix64 finalizer.
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace bfactor

#endif  // BFACTOR_RNG_HPP
