#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace market_ising {

// Deterministic random stream.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The std distributions are not, so the draws below are done by
// hand: every draw consumes exactly one engine output, which keeps streams
// bit-identical across standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    // Independent child stream keyed by a label. Depends only on (seed, label),
    // never on how many draws the parent has made.
    RngStream derive(std::string_view label) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed_);
        for (unsigned char c : label) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return RngStream(splitmix64(h));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Multiply-shift, one draw, bias below n / 2^64.
    std::uint64_t below(std::uint64_t n) {
        __extension__ using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<u128>(engine_()) * n) >> 64);
    }

    static constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace market_ising
