#pragma once

#include <cstdint>

namespace nomadsim {

// SplitMix64 stream. Chosen over <random> engines + distributions because the
// standard distributions are implementation-defined and this library promises
// byte-identical traces for a given (scenario, seed) on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] inclusive. Modulo bias is irrelevant at the
    // ranges used here (jitter bounds far below 2^64).
    std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

private:
    std::uint64_t state_;
};

// Derives an independent substream from the run seed, a module tag, and an
// entity id. Adding an entity never perturbs another entity's draws.
inline Rng derive_stream(std::uint64_t run_seed, std::uint64_t tag, std::uint64_t entity) {
    Rng mixer(run_seed ^ (tag * 0x9E3779B97F4A7C15ULL));
    const std::uint64_t a = mixer.next_u64();
    Rng mixer2(a ^ entity);
    return Rng(mixer2.next_u64());
}

namespace stream_tag {
inline constexpr std::uint64_t kLink = 0x4C494E4BULL;   // loss + jitter draws
inline constexpr std::uint64_t kNode = 0x4E4F4445ULL;   // per-node protocol draws
inline constexpr std::uint64_t kHarness = 0x54455354ULL; // test-only generators
} // namespace stream_tag

} // namespace nomadsim
