#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace nucspde {

enum class StreamTag : std::uint32_t {
  wiener = 1,
  jumps = 2,
  events = 3,
  samples = 4,
};

// Philox4x32-10. The key holds the seed; counter words 2..3 hold the path id
// and word 1 the stream tag, so every (seed, path_id, tag) owns a disjoint sequence.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint64_t path_id, std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, stream, static_cast<std::uint32_t>(path_id), static_cast<std::uint32_t>(path_id >> 32)} {}

  Philox4x32(std::uint64_t seed, std::uint64_t path_id, StreamTag tag, std::uint32_t sub = 0)
      : Philox4x32(seed, path_id, (static_cast<std::uint32_t>(tag) << 24) | (sub & 0xFFFFFFu)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (idx_ == 4) {
      out_ = block(ctr_, key_);
      ++ctr_[0];
      idx_ = 0;
    }
    return out_[idx_++];
  }

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return c;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> out_{};
  int idx_ = 4;
};

}  // namespace nucspde
