#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ocbc {

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives the seed of stream `index` under `seed`. Streams are independent of
/// the order in which they are consumed, so parallel and serial runs agree.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Seeded generator. All draws are built from raw 64-bit output so results are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform();

    /// Uniform on (0, 1]; safe to pass to log().
    double uniform_pos() { return 1.0 - uniform(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n);

    /// Index drawn proportionally to the (nonnegative) weights. Returns -1 when
    /// every weight is zero.
    int categorical(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

}  // namespace ocbc
