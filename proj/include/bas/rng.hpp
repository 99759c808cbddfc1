#pragma once

// Seed derivation and a portable random generator.
//
// Everything here is bit-exact across platforms: std::mt19937_64 has a
// standardised output sequence, and the distributions below are written out
// by hand because the <random> distributions are implementation-defined.

#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace bas {

using Seed = std::uint64_t;

/// One splitmix64 step: add the golden gamma, then the finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a over the raw bytes of `s`.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Purpose-labelled child seed: independent streams for pool split,
/// candidate sampling, MC generation and so on.
constexpr Seed derive_seed(Seed master, std::string_view purpose, std::uint64_t index = 0) noexcept {
    return mix64(mix64(master ^ fnv1a64(purpose)) ^ index);
}

/// Sub-seed for MC sample `j` of document `doc_id`. Part of the learner
/// wire protocol: external learners must derive exactly this value.
///   sub_seed = mix64(mix64(seed ^ fnv1a64(doc_id)) ^ j)
constexpr Seed mc_sub_seed(Seed seed, std::string_view doc_id, std::uint64_t j) noexcept {
    return mix64(mix64(seed ^ fnv1a64(doc_id)) ^ j);
}

class Rng {
public:
    explicit Rng(Seed seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). Rejection sampling, bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Positions of min(count, population) distinct draws from [0, population),
    /// in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count) {
        std::vector<std::size_t> perm(population);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        const std::size_t take = count < population ? count : population;
        for (std::size_t i = 0; i < take; ++i) {
            const auto j = i + static_cast<std::size_t>(below(population - i));
            std::swap(perm[i], perm[j]);
        }
        perm.resize(take);
        return perm;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace bas
