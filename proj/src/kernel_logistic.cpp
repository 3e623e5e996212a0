#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "postratio/classifier.hpp"
#include "postratio/error.hpp"

namespace postratio {

namespace {

constexpr int kModelVersion = 1;

using Matrix = Eigen::MatrixXd;

double squared_distance(Point a, Point b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return s;
}

std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t m) {
    std::vector<std::size_t> rows(m);
    for (std::size_t r = 0; r < m; ++r) rows[r] = r * n / m;
    return rows;
}

}  // namespace

KernelLogReg::KernelLogReg(std::size_t dim, std::vector<double> centers, Vector duals,
                           double intercept, double bandwidth, double l2)
    : dim_(dim), centers_(std::move(centers)), duals_(std::move(duals)), intercept_(intercept),
      bandwidth_(bandwidth), l2_(l2) {
    if (!(bandwidth_ > 0.0)) throw ConfigError("kernel bandwidth must be > 0");
    if (centers_.size() != duals_.size() * dim_)
        throw DataError("kernel model: centers and dual weights disagree");
    if (!duals_.allFinite() || !std::isfinite(intercept_))
        throw ConfigError("non-finite kernel logistic regression parameters");
}

double KernelLogReg::decision(Point x) const {
    check_dim(dim_, x);
    const double scale = -0.5 / (bandwidth_ * bandwidth_);
    double z = intercept_;
    for (Eigen::Index j = 0; j < duals_.size(); ++j) {
        Point c(centers_.data() + static_cast<std::size_t>(j) * dim_, dim_);
        z += duals_[j] * std::exp(scale * squared_distance(x, c));
    }
    return z;
}

double KernelLogReg::prob_positive(Point x) const { return clip_probability(logistic(decision(x))); }

nlohmann::json KernelLogReg::to_json() const {
    return {{"kind", kind()},
            {"version", kModelVersion},
            {"dim", dim_},
            {"centers", centers_},
            {"duals", std::vector<double>(duals_.begin(), duals_.end())},
            {"intercept", intercept_},
            {"bandwidth", bandwidth_},
            {"l2", l2_}};
}

double median_pairwise_distance(const LabeledDataset& data, std::size_t max_points) {
    require_non_empty(data, "bandwidth");
    const auto rows = evenly_spaced(data.size(), std::min(max_points, data.size()));
    std::vector<double> d;
    d.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = a + 1; b < rows.size(); ++b)
            d.push_back(std::sqrt(squared_distance(data.x(rows[a]), data.x(rows[b]))));
    if (d.empty()) return 1.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid > 0.0 ? *mid : 1.0;
}

KernelLogReg fit_kernel_logreg(const LabeledDataset& data, double l2,
                               const KernelLogRegOptions& options) {
    require_non_empty(data, "training");
    if (!(l2 > 0.0)) throw ConfigError("kernel logistic regression needs l2 > 0");
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    const double bandwidth =
        options.bandwidth > 0.0 ? options.bandwidth : median_pairwise_distance(data);
    const std::size_t m =
        options.max_centers > 0 ? std::min(options.max_centers, n) : n;
    const auto center_rows = evenly_spaced(n, m);

    std::vector<double> centers;
    centers.reserve(m * d);
    for (std::size_t r : center_rows) {
        auto x = data.x(r);
        centers.insert(centers.end(), x.begin(), x.end());
    }

    const double scale = -0.5 / (bandwidth * bandwidth);
    const auto mi = static_cast<Eigen::Index>(m);
    Matrix design(static_cast<Eigen::Index>(n), mi + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            Point c(centers.data() + j * d, d);
            design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::exp(scale * squared_distance(data.x(i), c));
        }
        design(static_cast<Eigen::Index>(i), mi) = 1.0;
    }
    // Penalty matrix blockdiag(K_cc, 1).
    Matrix penalty = Matrix::Zero(mi + 1, mi + 1);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            penalty(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = std::exp(
                scale * squared_distance(Point(centers.data() + a * d, d),
                                         Point(centers.data() + b * d, d)));
    penalty(mi, mi) = 1.0;

    Vector y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = sign(data.label(i));
    const double inv_n = 1.0 / static_cast<double>(n);

    auto objective = [&](const Vector& p, const Vector& z) {
        double loss = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(-y[i] * z[i]);
        return loss * inv_n + l2 * p.dot(penalty * p);
    };

    Vector params = Vector::Zero(mi + 1);
    Vector z = design * params;
    double value = objective(params, z);
    Vector grad(mi + 1), r(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
    FitInfo info;
    for (std::size_t it = 0;; ++it) {
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double s = logistic(-y[i] * z[i]);
            r[i] = -y[i] * s;
            w[i] = s * (1.0 - s);
        }
        grad = design.transpose() * r * inv_n + 2.0 * l2 * (penalty * params);
        info.gradient_norm = grad.lpNorm<Eigen::Infinity>();
        info.iterations = it;
        if (info.gradient_norm <= options.gradient_tolerance ||
            it >= options.max_newton_iterations)
            break;

        Matrix hessian = design.transpose() * (w.asDiagonal() * design) * inv_n;
        hessian += 2.0 * l2 * penalty;
        const double jitter = 1e-12 * std::max(1.0, hessian.diagonal().mean());
        hessian.diagonal().array() += jitter;
        Vector step = hessian.ldlt().solve(-grad);
        if (!step.allFinite() || grad.dot(step) >= 0.0) step = -grad;

        // Backtracking on the exact objective.
        const double slope = grad.dot(step);
        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
            Vector candidate = params + t * step;
            Vector zc = design * candidate;
            const double vc = objective(candidate, zc);
            if (vc <= value + 1e-4 * t * slope || (vc <= value && t < 1e-3)) {
                params = std::move(candidate);
                z = std::move(zc);
                value = vc;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    info.objective = value;
    info.converged = info.gradient_norm <= options.gradient_tolerance;

    KernelLogReg model(d, std::move(centers), params.head(mi), params[mi], bandwidth, l2);
    model.set_fit_info(info);
    return model;
}

}  // namespace postratio
