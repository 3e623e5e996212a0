#include "postratio/ratio.hpp"

#include <algorithm>
#include <cmath>

#include "postratio/error.hpp"

namespace postratio {

namespace {

constexpr int kRatioModelVersion = 1;

void check_theta(const Vector& theta, const NeighborCache& cache) {
    if (static_cast<std::size_t>(theta.size()) != cache.num_features())
        throw DimensionMismatch(cache.num_features(), static_cast<std::size_t>(theta.size()));
    if (!theta.allFinite()) throw ConfigError("non-finite theta");
}

}  // namespace

NeighborCache NeighborCache::build(const LabeledDataset& target, const LabeledDataset& sources,
                                   const KnnIndex& index, std::size_t k,
                                   const FeatureMap& map) {
    require_non_empty(target, "target");
    require_non_empty(sources, "source");
    if (k == 0) throw ConfigError("k must be >= 1");
    if (index.size() != sources.size()) throw ConfigError("k-NN index does not match sources");
    check_dim(map.input_dim(), std::span<const double>(target.x(0).data(), target.dim()));

    NeighborCache cache;
    cache.requested_k_ = k;
    cache.k_ = std::min(k, sources.size());
    const std::size_t n = target.size();
    const std::size_t m = map.output_dim();
    const auto mi = static_cast<Eigen::Index>(m);
    cache.target_features_.resize(static_cast<Eigen::Index>(n), mi);
    cache.neighbor_features_.resize(static_cast<Eigen::Index>(n * cache.k_), mi);
    cache.neighbors_.resize(n * cache.k_);

    // Features of each source row are computed at most once.
    RowMatrix source_features(static_cast<Eigen::Index>(sources.size()), mi);
    std::vector<bool> have(sources.size(), false);

    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        map.basis(target.x(i), {cache.target_features_.row(row).data(), m});
        cache.target_features_.row(row) *= sign(target.label(i));

        const auto nb = index.query(target.x(i), cache.k_);
        for (std::size_t r = 0; r < cache.k_; ++r) {
            const std::size_t j = nb.indices[r];
            const auto jr = static_cast<Eigen::Index>(j);
            if (!have[j]) {
                map.basis(sources.x(j), {source_features.row(jr).data(), m});
                source_features.row(jr) *= sign(sources.label(j));
                have[j] = true;
            }
            cache.neighbors_[i * cache.k_ + r] = j;
            cache.neighbor_features_.row(static_cast<Eigen::Index>(i * cache.k_ + r)) =
                source_features.row(jr);
        }
    }
    return cache;
}

NeighborCache NeighborCache::build(const LabeledDataset& target, const LabeledDataset& sources,
                                   std::size_t k, const FeatureMap& map) {
    return build(target, sources, KnnIndex(sources), k, map);
}

NeighborCache NeighborCache::subset(std::span<const std::size_t> rows) const {
    NeighborCache out;
    out.k_ = k_;
    out.requested_k_ = requested_k_;
    const auto cols = target_features_.cols();
    out.target_features_.resize(std::ssize(rows), cols);
    out.neighbor_features_.resize(static_cast<Eigen::Index>(rows.size() * k_), cols);
    out.neighbors_.resize(rows.size() * k_);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const std::size_t i = rows[a];
        out.target_features_.row(static_cast<Eigen::Index>(a)) =
            target_features_.row(static_cast<Eigen::Index>(i));
        out.neighbor_features_.middleRows(static_cast<Eigen::Index>(a * k_),
                                          static_cast<Eigen::Index>(k_)) =
            neighbor_features_.middleRows(static_cast<Eigen::Index>(i * k_),
                                          static_cast<Eigen::Index>(k_));
        std::copy_n(neighbors_.begin() + static_cast<std::ptrdiff_t>(i * k_), k_,
                    out.neighbors_.begin() + static_cast<std::ptrdiff_t>(a * k_));
    }
    return out;
}

double normalization(const Vector& theta, const NeighborCache& cache, std::size_t i) {
    check_theta(theta, cache);
    const auto k = static_cast<Eigen::Index>(cache.k());
    const Vector s = cache.neighbor_features().middleRows(static_cast<Eigen::Index>(i) * k, k) * theta;
    return s.array().exp().sum() / static_cast<double>(k);
}

double objective_and_gradient(const Vector& theta, const NeighborCache& cache, Vector& grad) {
    check_theta(theta, cache);
    const std::size_t n = cache.num_targets();
    const std::size_t k = cache.k();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double log_k = std::log(static_cast<double>(k));

    const Vector scores = cache.neighbor_features() * theta;
    Vector weights(scores.size());
    double log_norm_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto block = scores.segment(static_cast<Eigen::Index>(i * k), static_cast<Eigen::Index>(k));
        const double top = block.maxCoeff();
        double total = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            const double e = std::exp(block[static_cast<Eigen::Index>(r)] - top);
            weights[static_cast<Eigen::Index>(i * k + r)] = e;
            total += e;
        }
        weights.segment(static_cast<Eigen::Index>(i * k), static_cast<Eigen::Index>(k)) /= total;
        log_norm_sum += top + std::log(total) - log_k;
    }
    const Vector target_scores = cache.target_features() * theta;
    const double value = -target_scores.sum() * inv_n + log_norm_sum * inv_n;

    grad = (cache.neighbor_features().transpose() * weights -
            cache.target_features().colwise().sum().transpose()) *
           inv_n;
    return value;
}

double objective(const Vector& theta, const NeighborCache& cache) {
    Vector grad;
    return objective_and_gradient(theta, cache, grad);
}

Vector gradient(const Vector& theta, const NeighborCache& cache) {
    Vector grad;
    objective_and_gradient(theta, cache, grad);
    return grad;
}

std::string to_string(Penalty p) { return p == Penalty::SquaredL2 ? "squared_l2" : "l2_norm"; }

Penalty penalty_from_string(const std::string& s) {
    if (s == "squared_l2") return Penalty::SquaredL2;
    if (s == "l2_norm") return Penalty::L2Norm;
    throw ConfigError("unknown penalty '" + s + "'");
}

nlohmann::json to_json(const RatioModel& model) {
    return {{"format", "postratio.ratio_model"},
            {"version", kRatioModelVersion},
            {"theta", std::vector<double>(model.theta.begin(), model.theta.end())},
            {"feature_map", to_json(model.feature_map)},
            {"k", model.k},
            {"lambda", model.lambda},
            {"penalty", to_string(model.penalty)}};
}

RatioModel ratio_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "postratio.ratio_model" ||
        j.value("version", 0) != kRatioModelVersion)
        throw DataError("not a version-1 ratio model envelope");
    auto theta = j.at("theta").get<std::vector<double>>();
    RatioModel model;
    model.theta = Eigen::Map<Vector>(theta.data(), std::ssize(theta));
    model.feature_map = feature_map_from_json(j.at("feature_map"));
    if (static_cast<std::size_t>(model.theta.size()) != model.feature_map.output_dim())
        throw DataError("theta length does not match the feature map");
    model.k = j.at("k").get<std::size_t>();
    model.lambda = j.at("lambda").get<double>();
    model.penalty = penalty_from_string(j.value("penalty", "squared_l2"));
    return model;
}

RatioFit fit_ratio(const NeighborCache& cache, double lambda, const FeatureMap& map,
                   const RatioFitOptions& options) {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (map.output_dim() != cache.num_features())
        throw DimensionMismatch(cache.num_features(), map.output_dim());
    const auto m = static_cast<Eigen::Index>(cache.num_features());
    Vector start = options.start.value_or(Vector::Zero(m));
    if (start.size() != m) throw DimensionMismatch(static_cast<std::size_t>(m), start.size());

    OptimResult result;
    if (options.penalty == Penalty::SquaredL2) {
        result = minimize_lbfgs(
            [&](const Vector& theta, Vector& grad) {
                const double v = objective_and_gradient(theta, cache, grad);
                grad += 2.0 * lambda * theta;
                return v + lambda * theta.squaredNorm();
            },
            std::move(start), options.optim);
    } else {
        result = minimize_group_l2(
            [&](const Vector& theta, Vector& grad) {
                return objective_and_gradient(theta, cache, grad);
            },
            lambda, std::move(start), options.optim);
    }

    RatioFit fit{RatioModel{result.x, map, cache.k(), lambda, options.penalty}, {}};
    fit.report.final_objective = result.value;
    fit.report.unregularized_objective = objective(result.x, cache);
    fit.report.grad_norm = result.gradient_norm;
    fit.report.iterations = result.iterations;
    fit.report.converged = result.converged;
    if (cache.clamped()) {
        fit.report.warnings.push_back("k = " + std::to_string(cache.requested_k()) +
                                      " exceeds the source size; clamped to " +
                                      std::to_string(cache.k()));
    }
    if (!result.converged) {
        fit.report.warnings.push_back("optimizer stopped after " +
                                      std::to_string(result.iterations) +
                                      " iterations with gradient norm " +
                                      std::to_string(result.gradient_norm));
    }
    return fit;
}

RatioFit fit_ratio(const LabeledDataset& target, const LabeledDataset& sources, std::size_t k,
                   double lambda, const FeatureMap& map, const RatioFitOptions& options) {
    return fit_ratio(NeighborCache::build(target, sources, k, map), lambda, map, options);
}

std::vector<std::size_t> default_k_grid(std::size_t n_q) {
    std::vector<std::size_t> grid;
    const std::size_t upper = std::min<std::size_t>(512, n_q / 2);
    for (std::size_t k = 4; k <= upper; k *= 2) grid.push_back(k);
    if (grid.empty()) grid.push_back(std::max<std::size_t>(1, std::min<std::size_t>(4, n_q)));
    return grid;
}

const std::vector<double>& default_lambda_grid() {
    static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    return grid;
}

std::size_t k_schedule(std::size_t n_q) {
    const double l = std::log(static_cast<double>(std::max<std::size_t>(n_q, 2)));
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(l * l)), 1, n_q);
}

}  // namespace postratio
