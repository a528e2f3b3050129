#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rsaas {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Seed of repetition `index` under `master`: mix64(master ^ mix64(index + golden)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(master ^ mix64(index + kGolden));
}

/// Counter-based stream. Element i of stream (seed, label) is
///   mix64(key + (i + 1) * golden),  key = mix64(seed ^ fnv1a(label)),
/// i.e. the SplitMix64 sequence started from `key`. Elements can be read
/// sequentially with next() or addressed directly with at(i).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label)
        : seed_(seed), label_(label), key_(mix64(seed ^ fnv1a(label))) {}

    std::uint64_t at(std::uint64_t index) const { return mix64(key_ + (index + 1) * kGolden); }
    std::uint64_t next() { return at(counter_++); }

    /// Uniform in [0, 1) with 53 random bits.
    static double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }
    double uniform_at(std::uint64_t index) const { return to_unit(at(index)); }
    double uniform() { return to_unit(next()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n), n > 0 (Lemire's multiply-shift, no rejection).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t seed_;
    std::string label_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace rsaas
