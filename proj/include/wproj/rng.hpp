#pragma once

#include <cstdint>
#include <string_view>

namespace wproj {

// Counter-based deterministic random stream built on splitmix64. Substreams
// are derived by hashing labels/counters into the seed, so every instance of
// a randomized run can be regenerated independently of evaluation order and
// of the platform's std:: distributions.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [lo, hi] (inclusive); simple modulo, fine for harness use.
    std::uint64_t uniform_index(std::uint64_t lo, std::uint64_t hi) {
        return lo + next_u64() % (hi - lo + 1);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Derive a substream seed from a parent seed and a list of counters/labels.
    static std::uint64_t derive(std::uint64_t seed, std::string_view label,
                                std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
        std::uint64_t h = seed;
        for (char ch : label) h = mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(ch)));
        h = mix(h ^ a);
        h = mix(h ^ b);
        h = mix(h ^ c);
        return h;
    }

private:
    std::uint64_t state_;
};

} // namespace wproj
