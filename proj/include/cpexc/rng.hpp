#pragma once

// Counter-based random streams.
//
// Philox4x32-10 (Salmon et al., SC'11). A 64-bit master seed and a stream
// domain are hashed (splitmix64) into the 64-bit Philox key. Within a domain,
// stream `id` uses counter words (draw_lo, draw_hi, id_lo, id_hi), so every
// stream is a pure function of (seed, domain, id) and draw index. Simulation
// assigns stream id = global sample index, which makes results independent of
// how samples are distributed over workers.

#include <array>
#include <cmath>
#include <cstdint>

namespace cpexc {

/// Stream domains. Each experiment family draws from its own key.
enum class StreamDomain : std::uint64_t {
  excursion = 1,
  upper_segment = 2,
  test = 99,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Block single_round(const Block& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
            static_cast<std::uint32_t>(p0)};
  }
};

/// One reproducible stream of uniforms on (0, 1].
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, StreamDomain domain, std::uint64_t stream_id)
      : key_(derive_key(seed, domain)), stream_id_(stream_id) {}

  /// Uniform on (0, 1] with 53 random bits; never returns 0.
  double uniform() {
    if (cursor_ == 2) refill();
    const std::uint64_t bits = words_[cursor_++];
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
  }

  /// Exponential with the given rate.
  double exponential(double rate) { return -std::log(uniform()) / rate; }

  std::uint64_t blocks_used() const { return counter_; }

  static Philox4x32::Key derive_key(std::uint64_t seed, StreamDomain domain) {
    const std::uint64_t k =
        splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain)));
    return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

 private:
  void refill() {
    const Philox4x32::Block ctr = {
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const auto out = Philox4x32::generate(ctr, key_);
    words_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    words_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    ++counter_;
    cursor_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> words_{};
  int cursor_ = 2;
};

}  // namespace cpexc
