#pragma once

#include <cstdint>

namespace ergo {

// Counter-based uniform generator. Every draw is a pure function of
// (seed, stream, counter), so paths, agents and phases can each own a
// stream and the whole simulation replays bit-for-bit from the seed,
// in any execution order.
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// splitmix64 finalizer
inline constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t bits_at(std::uint64_t seed, std::uint64_t stream,
                                       std::uint64_t counter) {
    std::uint64_t h = mix(seed + kGolden);
    h = mix(h ^ (stream + kGolden));
    h = mix(h ^ (counter + kGolden));
    return h;
}

// 53-bit mantissa draw in [0, 1)
inline constexpr double uniform_at(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t counter) {
    return static_cast<double>(bits_at(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// Stream id for one draw site of the loop simulation: path, time step,
// agent, phase (0 = output sampling, 1 = transition sampling).
inline constexpr std::uint64_t loop_stream(std::uint64_t path, std::uint64_t step,
                                           std::uint64_t agent, std::uint64_t phase) {
    std::uint64_t h = mix(path + kGolden);
    h = mix(h ^ (step + kGolden));
    h = mix(h ^ ((agent << 1 | phase) + kGolden));
    return h;
}

} // namespace rng

struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;

    std::uint64_t next_bits() { return rng::bits_at(seed, stream, counter++); }
    double next_uniform() { return rng::uniform_at(seed, stream, counter++); }
};

} // namespace ergo
