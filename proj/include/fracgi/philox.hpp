#pragma once

#include <array>
#include <cstdint>

namespace fracgi {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block of
// four 32-bit words is a pure function of (key, counter), so any frame can be
// regenerated without replaying the stream before it.
class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// Sequential view over the Philox blocks of one substream. The substream is
// selected by a 64-bit id (the frame index), the position inside it by a
// 64-bit block counter.
class PhiloxStream {
public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_id_(stream_id) {}

  std::uint64_t next_u64() noexcept {
    if (lane_ == 2) refill();
    return cache_[lane_++];
  }

  // Uniform on (0, 1]; zero is unreachable.
  double next_open_closed() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

private:
  void refill() noexcept {
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const auto out = Philox4x32::block(ctr, key_);
    cache_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    cache_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    ++block_;
    lane_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> cache_{};
  int lane_ = 2;
};

} // namespace fracgi
