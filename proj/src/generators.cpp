#include "postratio/generators.hpp"

#include <array>

#include "postratio/error.hpp"

namespace postratio {

LabeledDataset gaussian_shift_sample(std::size_t n, double class_mean, Rng& rng) {
    LabeledDataset data(1);
    const std::size_t pos = positives_in(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Label y = i < pos ? Label::Positive : Label::Negative;
        const double x = sign(y) * class_mean + rng.normal();
        data.add(y, std::span<const double>(&x, 1));
    }
    return data;
}

DatasetPair gen_gaussian_shift(std::size_t n_p, std::size_t n_q, std::uint64_t seed,
                               const GaussianShiftParams& params) {
    if (n_p < 1 || n_q < 1) throw ConfigError("gaussian-shift counts must be >= 1");
    auto target_rng = stream_rng(seed, Stream::Target);
    auto source_rng = stream_rng(seed, Stream::Source);
    return {gaussian_shift_sample(n_p, params.target_mean, target_rng),
            gaussian_shift_sample(n_q, params.source_mean, source_rng)};
}

LabeledDataset four_gaussian_sample(std::size_t n, double shift, Rng& rng) {
    if (n < 4) throw ConfigError("four-gaussian draws need at least 4 samples");
    constexpr std::array<double, 2> kPositiveCenters{-3.0, 3.0};
    constexpr std::array<double, 2> kNegativeCenters{-1.0, 1.0};
    LabeledDataset data(2);
    const std::size_t pos = positives_in(n);
    const std::array<std::size_t, 2> class_size{pos, n - pos};
    for (int c = 0; c < 2; ++c) {
        const Label y = c == 0 ? Label::Positive : Label::Negative;
        const auto& centers = c == 0 ? kPositiveCenters : kNegativeCenters;
        const std::size_t m = class_size[c];
        const std::size_t first = m - m / 2;
        for (std::size_t i = 0; i < m; ++i) {
            const double cx = centers[i < first ? 0 : 1];
            std::array<double, 2> x{cx + rng.normal(), sign(y) * shift + rng.normal()};
            data.add(y, x);
        }
    }
    return data;
}

DatasetPair gen_four_gaussian(std::size_t n_p, std::size_t n_q, double shift,
                              std::uint64_t seed) {
    if (shift < 0.0) throw ConfigError("four-gaussian shift must be >= 0");
    auto target_rng = stream_rng(seed, Stream::Target);
    auto source_rng = stream_rng(seed, Stream::Source);
    return {four_gaussian_sample(n_p, shift, target_rng),
            four_gaussian_sample(n_q, 0.0, source_rng)};
}

}  // namespace postratio
