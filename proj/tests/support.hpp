#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "postratio/dataset.hpp"

namespace testing {

using postratio::Label;
using postratio::LabeledDataset;

/// n rows of standard-normal features, labels by fair coin.
inline LabeledDataset random_dataset(std::size_t n, std::size_t dim, std::mt19937_64& gen,
                                     double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::bernoulli_distribution coin(0.5);
    LabeledDataset d(dim);
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : x) v = normal(gen);
        d.add(coin(gen) ? Label::Positive : Label::Negative, x);
    }
    return d;
}

/// Flat-scan oracle: sort every row by (squared distance, index), keep k.
inline std::vector<std::size_t> scan_knn(const LabeledDataset& data,
                                         const std::vector<std::size_t>& rows,
                                         std::span<const double> x, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t r : rows) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < data.dim(); ++c) {
            const double diff = data.x(r)[c] - x[c];
            d2 += diff * diff;
        }
        all.emplace_back(d2, r);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
    return out;
}

inline std::vector<std::size_t> all_rows(const LabeledDataset& data) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testing
