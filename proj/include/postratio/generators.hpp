#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "postratio/dataset.hpp"
#include "postratio/random.hpp"

namespace postratio {

/// (target D_P, source D_Q).
using DatasetPair = std::pair<LabeledDataset, LabeledDataset>;

/// Substream ids consumed by the generators. Each dataset draw owns one.
enum class Stream : std::uint64_t { Source = 1, Target = 2, Holdout = 3, Test = 4 };

inline Rng stream_rng(std::uint64_t seed, Stream s) {
    return Rng(seed, static_cast<std::uint64_t>(s));
}

/// Number of +1 samples in a balanced draw of n; +1 receives the odd one.
inline std::size_t positives_in(std::size_t n) { return n - n / 2; }

/// 1-D two-class Gaussian draw: x | y ~ Normal(y * mean, 1), balanced classes,
/// positives first.
LabeledDataset gaussian_shift_sample(std::size_t n, double class_mean, Rng& rng);

struct GaussianShiftParams {
    double source_mean = 2.0;
    double target_mean = 1.5;
};

/// Target: x|y ~ N(1.5y, 1); source: x|y ~ N(2y, 1) (defaults).
DatasetPair gen_gaussian_shift(std::size_t n_p, std::size_t n_q, std::uint64_t seed,
                               const GaussianShiftParams& params = {});

/// 2-D four-component draw. Class +1 components sit at (-3, shift), (3, shift);
/// class -1 at (-1, -shift), (1, -shift); unit isotropic covariance. Balanced
/// classes and components, positives first.
LabeledDataset four_gaussian_sample(std::size_t n, double shift, Rng& rng);

/// Source uses shift 0, target uses `shift`. Requires counts >= 4.
DatasetPair gen_four_gaussian(std::size_t n_p, std::size_t n_q, double shift,
                              std::uint64_t seed);

}  // namespace postratio
