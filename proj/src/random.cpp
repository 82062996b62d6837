#include "ocbc/random.hpp"

namespace ocbc {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int n) {
    // Lemire's multiply-shift on 32-bit draws, with rejection to stay unbiased.
    const auto range = static_cast<std::uint32_t>(n);
    const std::uint32_t threshold = (0u - range) % range;
    for (;;) {
        const auto x = static_cast<std::uint32_t>(engine_() >> 32);
        const std::uint64_t m = static_cast<std::uint64_t>(x) * range;
        if (static_cast<std::uint32_t>(m) >= threshold) {
            return static_cast<int>(m >> 32);
        }
    }
}

int Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) return -1;
    const double u = uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = static_cast<int>(i);
        if (u < acc) return last_positive;
    }
    return last_positive;
}

}  // namespace ocbc
