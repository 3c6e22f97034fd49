#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "vleed/errors.hpp"

namespace vleed {

// Deterministic generator: mersenne twister core with explicitly coded
// derived draws, so identical seeds give bit-identical sequences on every
// platform (std::normal_distribution and friends are implementation-defined
// and deliberately avoided).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, bound) by rejection; bound must be positive.
    std::uint64_t uniform_index(std::uint64_t bound) {
        if (bound == 0) throw ContractViolation("Rng::uniform_index: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * kPi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates; std::shuffle is implementation-defined and not used.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Named substream: an independent generator derived from (seed, tag).
    // Keeps unrelated consumers (shuffling, noise, dropout, init) from
    // perturbing each other's sequences.
    Rng stream(std::string_view tag) const {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
        auto mix = [&h](std::uint64_t byte) {
            h ^= byte;
            h *= 0x100000001b3ull;
        };
        for (int i = 0; i < 8; ++i) mix((seed_ >> (8 * i)) & 0xff);
        for (char c : tag) mix(static_cast<std::uint8_t>(c));
        return Rng(h);
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace vleed
