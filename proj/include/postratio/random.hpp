#pragma once

#include <cstdint>
#include <random>

namespace postratio {

/// SplitMix64 finalizer; used to derive well-separated substream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for substream `stream` of master seed `seed`. Distinct streams of the
/// same seed are statistically independent for all practical purposes, and
/// adding a new stream never changes the draws of an existing one.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream);

/// The library's only random engine.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(substream_seed(seed, stream)) {}

    double normal() { return normal_(engine_); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace postratio

#include <cstddef>
#include <vector>

namespace postratio {

/// Fold id in [0, folds) for each of n rows: a seeded shuffle dealt round-robin,
/// so fold sizes differ by at most one.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

}  // namespace postratio
