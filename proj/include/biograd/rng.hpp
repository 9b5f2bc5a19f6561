#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace biograd {

// Splittable counter-based generator built on the SplitMix64 finalizer.
// The raw u64 stream is a pure integer function of the seed, so a fixed seed
// replays the identical sequence on every platform and build. Floating-point
// draws are derived from the integer stream by exact arithmetic.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix(seed_ + kGamma * counter_);
    }

    // Child stream addressed by label. Depends only on (seed, label), never on
    // how many values the parent has produced, so fork order is irrelevant.
    Rng fork(std::uint64_t label) const {
        return Rng(mix(mix(seed_ ^ kForkSalt) + kGamma * (label + 1)));
    }

    // Sequential split: consumes one draw to seed an independent child.
    Rng split() { return Rng(mix(next_u64() ^ kForkSalt)); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller; the pair's second value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // `count` distinct indices drawn from [0, total) without replacement.
    std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t count) {
        std::vector<std::size_t> pool(total);
        for (std::size_t i = 0; i < total; ++i) pool[i] = i;
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t j = i + below(total - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(count);
        return pool;
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
    static constexpr std::uint64_t kForkSalt = 0xda942042e4dd58b5ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace biograd
