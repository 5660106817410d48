#pragma once

// Seedable, splittable random stream. Every stochastic operation in the
// library takes an explicit RngStream; there is no ambient randomness, so
// any run is reproducible from its seed alone. Child streams derived via
// split() are statistically independent of the parent and of each other,
// which lets trial loops parallelize without changing results.

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace qsc {

namespace detail {

// SplitMix64 finalizer; used both to condition raw seeds and to derive
// child-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

}  // namespace detail

class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : seed_(seed), engine_(detail::mix64(seed + 0x9e3779b97f4a7c15ull)) {}

    std::uint64_t seed() const { return seed_; }

    // Deterministic child stream for the given key. Independent keys give
    // decorrelated streams; splitting does not advance this stream.
    RngStream split(std::uint64_t key) const {
        std::uint64_t a = detail::mix64(seed_ + 0x9e3779b97f4a7c15ull);
        std::uint64_t b = detail::mix64(key + 0x3c6ef372fe94f82aull);
        return RngStream(detail::mix64(a ^ b));
    }

    std::uint64_t bits() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; two uniforms per draw, no cached state,
    // so interleaving with other draws stays reproducible.
    double normal() {
        double u = 1.0 - uniform();  // (0, 1]
        double r = std::sqrt(-2.0 * std::log(u));
        double theta = 2.0 * M_PI * uniform();
        return r * std::cos(theta);
    }

    // Uniform integer in [0, bound); rejection sampling, no modulo bias.
    std::uint64_t integer(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("integer: bound must be positive");
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    // Flat Dirichlet sample (uniform on the simplex), length n.
    std::vector<double> dirichlet_flat(std::size_t n) {
        if (n == 0) throw std::invalid_argument("dirichlet_flat: empty");
        std::vector<double> e(n);
        double total = 0.0;
        for (auto& v : e) {
            v = -std::log(1.0 - uniform());
            total += v;
        }
        for (auto& v : e) v /= total;
        return e;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace qsc
