#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "postratio/error.hpp"
#include "postratio/random.hpp"
#include "postratio/ratio.hpp"

namespace postratio {

namespace {
constexpr double kMseTolerance = 1e-12;
}  // namespace

HoldoutNeighbors::HoldoutNeighbors(const LabeledDataset& sources, std::size_t max_k,
                                   std::size_t folds, std::uint64_t seed) {
    require_non_empty(sources, "source");
    if (sources.size() < 2) throw ConfigError("holdout k selection needs at least 2 source rows");
    folds_ = std::clamp<std::size_t>(folds, 2, sources.size());
    fold_of_ = assign_folds(sources.size(), folds_, seed);

    std::vector<std::vector<std::size_t>> members(folds_);
    for (std::size_t j = 0; j < sources.size(); ++j) members[fold_of_[j]].push_back(j);
    std::size_t smallest_train = sources.size();
    for (const auto& m : members) smallest_train = std::min(smallest_train, sources.size() - m.size());
    max_k_ = std::clamp<std::size_t>(max_k, 1, smallest_train);

    neighbors_.resize(sources.size() * max_k_);
    std::vector<std::size_t> train;
    for (std::size_t f = 0; f < folds_; ++f) {
        train.clear();
        for (std::size_t j = 0; j < sources.size(); ++j)
            if (fold_of_[j] != f) train.push_back(j);
        const KnnIndex index(sources, train);
        for (std::size_t j : members[f]) {
            const auto nb = index.query(sources.x(j), max_k_);
            std::copy(nb.indices.begin(), nb.indices.end(),
                      neighbors_.begin() + static_cast<std::ptrdiff_t>(j * max_k_));
        }
    }
}

std::vector<double> holdout_mse(const Vector& theta, const LabeledDataset& sources,
                                const FeatureMap& map, const HoldoutNeighbors& neighbors,
                                const std::vector<std::size_t>& k_grid) {
    const std::size_t n = sources.size();
    std::vector<double> z(n);
    for (std::size_t j = 0; j < n; ++j) z[j] = std::exp(map.score(theta, sources.label(j), sources.x(j)));

    const std::size_t folds = neighbors.folds();
    std::vector<double> fold_sq(k_grid.size() * folds, 0.0);
    std::vector<std::size_t> fold_count(folds, 0);
    std::size_t needed = 0;
    for (std::size_t k : k_grid) needed = std::max(needed, std::min(k, neighbors.max_k()));

    std::vector<double> prefix(needed + 1);
    for (std::size_t j = 0; j < n; ++j) {
        prefix[0] = 0.0;
        for (std::size_t r = 0; r < needed; ++r) prefix[r + 1] = prefix[r] + z[neighbors.neighbor(j, r)];
        const std::size_t f = neighbors.fold_of(j);
        ++fold_count[f];
        for (std::size_t g = 0; g < k_grid.size(); ++g) {
            const std::size_t k = std::clamp<std::size_t>(k_grid[g], 1, neighbors.max_k());
            const double err = z[j] - prefix[k] / static_cast<double>(k);
            fold_sq[g * folds + f] += err * err;
        }
    }
    std::vector<double> mse(k_grid.size(), 0.0);
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
        for (std::size_t f = 0; f < folds; ++f)
            mse[g] += fold_sq[g * folds + f] / static_cast<double>(fold_count[f]);
        mse[g] /= static_cast<double>(folds);
    }
    return mse;
}

RatioFit select_k(const LabeledDataset& target, const LabeledDataset& sources,
                  std::vector<std::size_t> k_grid, double lambda, const FeatureMap& map,
                  const SelectionOptions& options) {
    require_non_empty(target, "target");
    require_non_empty(sources, "source");
    if (k_grid.empty()) throw ConfigError("empty k grid");
    if (options.max_rounds == 0) throw ConfigError("max_rounds must be >= 1");

    std::vector<std::string> warnings;
    for (auto& k : k_grid) {
        if (k == 0) throw ConfigError("k must be >= 1");
        if (k > sources.size()) {
            warnings.push_back("grid value k = " + std::to_string(k) + " clamped to " +
                               std::to_string(sources.size()));
            k = sources.size();
        }
    }
    std::sort(k_grid.begin(), k_grid.end());
    k_grid.erase(std::unique(k_grid.begin(), k_grid.end()), k_grid.end());

    const KnnIndex index(sources);
    std::optional<HoldoutNeighbors> holdout;
    if (k_grid.size() > 1)
        holdout.emplace(sources, k_grid.back(), options.folds, options.seed);

    RatioFitOptions fit_options = options.fit;
    std::size_t k = k_grid.front();
    RatioFit fit;
    std::vector<std::pair<std::size_t, double>> trace;
    for (std::size_t round = 0; round < options.max_rounds; ++round) {
        const auto cache = NeighborCache::build(target, sources, index, k, map);
        fit = fit_ratio(cache, lambda, map, fit_options);
        if (!holdout) {
            trace.emplace_back(k, 0.0);
            break;
        }
        const auto mse = holdout_mse(fit.model.theta, sources, map, *holdout, k_grid);
        // Stay at the current k unless another grid value is clearly better.
        std::size_t best = static_cast<std::size_t>(
            std::find(k_grid.begin(), k_grid.end(), k) - k_grid.begin());
        for (std::size_t g = 0; g < mse.size(); ++g)
            if (mse[g] < mse[best] - kMseTolerance) best = g;
        trace.emplace_back(k_grid[best], mse[best]);
        if (k_grid[best] == k) break;
        k = k_grid[best];
        fit_options.start = fit.model.theta;
    }
    fit.report.k_trace = std::move(trace);
    fit.report.warnings.insert(fit.report.warnings.begin(), warnings.begin(), warnings.end());
    return fit;
}

namespace {

double cv_score(const NeighborCache& full, double lambda, const FeatureMap& map,
                const std::vector<std::size_t>& fold_of, std::size_t folds,
                const RatioFitOptions& fit_options) {
    double total = 0.0;
    std::vector<std::size_t> train, valid;
    for (std::size_t f = 0; f < folds; ++f) {
        train.clear();
        valid.clear();
        for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? valid : train).push_back(i);
        const auto fit = fit_ratio(full.subset(train), lambda, map, fit_options);
        total += objective(fit.model.theta, full.subset(valid));
    }
    return total / static_cast<double>(folds);
}

std::size_t target_folds(std::size_t n, std::size_t requested) {
    return n >= requested ? requested : n;
}

}  // namespace

double lambda_cv_score(const LabeledDataset& target, const LabeledDataset& sources,
                       std::size_t k, double lambda, const FeatureMap& map,
                       const SelectionOptions& options) {
    const auto full = NeighborCache::build(target, sources, k, map);
    const std::size_t folds = target_folds(target.size(), options.folds);
    if (folds < 2) throw ConfigError("lambda cross-validation needs at least 2 target rows");
    return cv_score(full, lambda, map, assign_folds(target.size(), folds, options.seed), folds,
                    options.fit);
}

double select_lambda(const LabeledDataset& target, const LabeledDataset& sources, std::size_t k,
                     const std::vector<double>& lambda_grid, const FeatureMap& map,
                     const SelectionOptions& options) {
    if (lambda_grid.empty()) throw ConfigError("empty lambda grid");
    for (double l : lambda_grid)
        if (!(l >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (lambda_grid.size() == 1) return lambda_grid.front();
    // A single row leaves nothing to validate on; fall back to the strongest penalty.
    if (target.size() < 2) return *std::max_element(lambda_grid.begin(), lambda_grid.end());

    const auto full = NeighborCache::build(target, sources, k, map);
    const std::size_t folds = target_folds(target.size(), options.folds);
    const auto fold_of = assign_folds(target.size(), folds, options.seed);
    double best_score = std::numeric_limits<double>::infinity();
    double best = lambda_grid.front();
    for (double lambda : lambda_grid) {
        const double score = cv_score(full, lambda, map, fold_of, folds, options.fit);
        if (score < best_score || (score == best_score && lambda > best)) {
            best_score = score;
            best = lambda;
        }
    }
    return best;
}

}  // namespace postratio
