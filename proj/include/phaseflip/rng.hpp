#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phaseflip {

/// Deterministic random stream identified by (seed, label).
///
/// The same (seed, label) pair reproduces the same draw sequence on every
/// platform: the engine is std::mt19937_64 (fully specified by the standard)
/// and all samplers below are hand-rolled on top of its raw output instead of
/// std::*_distribution, whose results differ between standard libraries.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string label)
        : seed_(seed), label_(std::move(label)),
          engine_(mix(seed_ ^ fnv1a(label_))) {}

    /// Derive an independent child stream; the parent is not consumed.
    RngStream substream(std::string_view sub) const {
        return RngStream(seed_, label_ + "/" + std::string(sub));
    }

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, bound) via rejection.
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    /// Always consumes exactly one draw, so call sequences stay aligned
    /// across branches. p >= 1 is always true, p <= 0 always false.
    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle using this stream.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    // splitmix64 finalizer; spreads nearby seeds before engine seeding
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::string label_;
    std::mt19937_64 engine_;
};

} // namespace phaseflip
