#pragma once

#include <cstdint>
#include <random>

namespace qmle {

/// splitmix64 mixing step; also the seed-derivation primitive.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from (base, stream). Streams derived
/// from the same base with distinct ids are decorrelated, so concurrent
/// consumers never share generator state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    s ^= 0xd1b54a32d192ed03ULL * (stream + 1);
    (void)splitmix64(s);
    return splitmix64(s);
}

/// Deterministic uniform/normal source. mt19937_64 has a fully specified
/// sequence, and the variate transforms below are hand-rolled because the
/// std::*_distribution outputs are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform01() {
        const std::uint64_t bits = gen_() >> 11; // 53 random bits
        return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal via Box-Muller.
    double normal01() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace qmle
