#include "maser/rng.hpp"

namespace maser {

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint64_t stream, StreamPurpose purpose) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      purpose_(static_cast<std::uint32_t>(purpose)),
      stream_lo_(static_cast<std::uint32_t>(stream)),
      stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

}  // namespace maser
