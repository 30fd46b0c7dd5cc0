#pragma once

#include <array>
#include <cstdint>

namespace maser {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
inline PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
  return c;
}

/// Which use of a stream a block belongs to. Occupies the top byte of the
/// second counter word so the sub-streams can never overlap.
enum class StreamPurpose : std::uint32_t { dynamics = 0, initial_state = 1, synthetic = 2 };

/// Deterministic random blocks addressed by (seed, stream, purpose, index).
/// The key is the 64-bit seed; the counter is
///   {index_lo, purpose << 24 | index_hi, stream_lo, stream_hi}
/// with index limited to 56 bits.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream, StreamPurpose purpose) noexcept;
  PhiloxCounter block(std::uint64_t index) const noexcept {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(index),
                            (purpose_ << 24) | (static_cast<std::uint32_t>(index >> 32) & 0xFFFFFFu),
                            stream_lo_, stream_hi_};
    return philox4x32(ctr, key_);
  }
  PhiloxCounter next() noexcept { return block(index_++); }
  std::uint64_t index() const noexcept { return index_; }

 private:
  PhiloxKey key_;
  std::uint32_t purpose_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t index_ = 0;
};

/// 53-bit uniform in [0, 1) from two 32-bit words.
inline double unit_double(std::uint32_t lo, std::uint32_t hi) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace maser
