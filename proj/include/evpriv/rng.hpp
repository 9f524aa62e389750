#pragma once

#include <cstdint>
#include <random>

namespace evpriv {

using RandomStream = std::mt19937_64;

/// Independent stream for (seed, stream id, counter). The protocol uses the EV id as
/// stream id and the iteration as counter, so draws never depend on evaluation order.
inline RandomStream make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
  return RandomStream(seq);
}

}  // namespace evpriv
