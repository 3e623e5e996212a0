#include <doctest.h>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

#include "postratio/classifier.hpp"
#include "postratio/error.hpp"
#include "postratio/generators.hpp"
#include "postratio/lbfgs.hpp"
#include "support.hpp"

using namespace postratio;

namespace {

/// Newton iterations on mean logistic loss + l2 * |[w; b]|^2.
Vector newton_logreg(const LabeledDataset& data, double l2) {
    const auto m = static_cast<Eigen::Index>(data.dim() + 1);
    Vector p = Vector::Zero(m);
    const double n = static_cast<double>(data.size());
    for (int it = 0; it < 100; ++it) {
        Vector g = 2.0 * l2 * p;
        Eigen::MatrixXd h = 2.0 * l2 * Eigen::MatrixXd::Identity(m, m);
        for (std::size_t i = 0; i < data.size(); ++i) {
            Vector z(m);
            for (std::size_t c = 0; c < data.dim(); ++c) z(static_cast<Eigen::Index>(c)) = data.x(i)[c];
            z(m - 1) = 1.0;
            const double y = sign(data.label(i));
            const double s = 1.0 / (1.0 + std::exp(y * p.dot(z)));
            g -= y * s * z / n;
            h += s * (1.0 - s) * z * z.transpose() / n;
        }
        const Vector step = h.ldlt().solve(g);
        p -= step;
        if (step.norm() < 1e-14) break;
    }
    return p;
}

double training_error(const BinaryClassifier& model, const LabeledDataset& data) {
    std::size_t miss = 0;
    for (std::size_t i = 0; i < data.size(); ++i) miss += classify(model, data.x(i)) != data.label(i);
    return static_cast<double>(miss) / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("logistic helpers") {
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic(800.0) == 1.0);
    CHECK(logistic(-800.0) >= 0.0);
    CHECK(softplus(800.0) == 800.0);
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(clip_probability(0.0) == kProbClip);
    CHECK(clip_probability(1.0) == 1.0 - kProbClip);
}

TEST_CASE("lbfgs minimizes a quadratic and the Rosenbrock function") {
    Eigen::MatrixXd a(3, 3);
    a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    Vector b(3);
    b << 1, -2, 0.5;
    const auto quad = [&](const Vector& x, Vector& g) {
        g = a * x - b;
        return 0.5 * x.dot(a * x) - b.dot(x);
    };
    const auto r = minimize_lbfgs(quad, Vector::Zero(3));
    CHECK(r.converged);
    CHECK((r.x - a.ldlt().solve(b)).norm() < 1e-8);

    const auto rosen = [](const Vector& x, Vector& g) {
        const double u = 1 - x(0), v = x(1) - x(0) * x(0);
        g(0) = -2 * u - 400 * x(0) * v;
        g(1) = 200 * v;
        return u * u + 100 * v * v;
    };
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto rr = minimize_lbfgs(rosen, x0);
    CHECK(rr.converged);
    CHECK(std::abs(rr.x(0) - 1.0) < 1e-6);
    CHECK(std::abs(rr.x(1) - 1.0) < 1e-6);
}

TEST_CASE("group l2 proximal solver matches the closed form") {
    // min 0.5 |x - c|^2 + w |x|  =>  x = c * max(0, 1 - w / |c|).
    Vector c(3);
    c << 3.0, -4.0, 0.0;
    const auto f = [&](const Vector& x, Vector& g) {
        g = x - c;
        return 0.5 * (x - c).squaredNorm();
    };
    const auto r = minimize_group_l2(f, 2.0, Vector::Zero(3));
    CHECK(r.converged);
    CHECK((r.x - c * (1.0 - 2.0 / 5.0)).norm() < 1e-7);
    CHECK(minimize_group_l2(f, 6.0, Vector::Ones(3)).x.norm() == 0.0);
}

TEST_CASE("linear logistic regression matches Newton") {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto data = testing::random_dataset(40 + 10 * trial, 1 + trial % 3, gen);
        const double l2 = 0.01;
        const auto model = fit_logreg(data, l2);
        const Vector oracle = newton_logreg(data, l2);
        const auto d = static_cast<Eigen::Index>(data.dim());
        CHECK((model.weights() - oracle.head(d)).norm() < 1e-6);
        CHECK(std::abs(model.intercept() - oracle(d)) < 1e-6);
        CHECK(model.fit_info().converged);
    }
}

TEST_CASE("logreg loss gradient") {
    std::mt19937_64 gen(2);
    const auto data = testing::random_dataset(30, 3, gen);
    Vector p(4);
    p << 0.3, -1.2, 0.8, 0.1;
    Vector g;
    logreg_loss(data, p, 0.05, &g);
    for (Eigen::Index c = 0; c < 4; ++c) {
        Vector a = p, b = p;
        a(c) += 1e-6;
        b(c) -= 1e-6;
        const double fd = (logreg_loss(data, a, 0.05, nullptr) - logreg_loss(data, b, 0.05, nullptr)) / 2e-6;
        CHECK(testing::relative_error(fd, g(c)) < 1e-6);
    }
}

TEST_CASE("predict_proba is clipped and complementary") {
    Vector w(1);
    w << 1e4;
    const LinearLogReg model(w, 0.0);
    for (double x : {-10.0, -0.1, 0.0, 0.3, 50.0}) {
        const double v[] = {x};
        const double pp = predict_proba(model, v, Label::Positive);
        const double pn = predict_proba(model, v, Label::Negative);
        CHECK(pp >= kProbClip);
        CHECK(pp <= 1.0 - kProbClip);
        CHECK(pp + pn == 1.0);
    }
    const double zero[] = {0.0};
    CHECK(classify(model, zero) == Label::Positive);
    const double bad[] = {0.0, 1.0};
    CHECK_THROWS_AS(model.prob_positive(bad), DimensionMismatch);
}

TEST_CASE("kernel logistic regression captures the interleaved source") {
    const auto [target, sources] = gen_four_gaussian(40, 1000, 1.0, 3);
    const auto linear = fit_logreg(sources, 1e-3);
    const auto kernel = fit_kernel_logreg(sources, 1e-3);
    CHECK(kernel.fit_info().converged);
    CHECK(training_error(kernel, sources) < training_error(linear, sources));
    CHECK(training_error(kernel, sources) < 0.2);

    KernelLogRegOptions capped;
    capped.max_centers = 100;
    CHECK(fit_kernel_logreg(sources, 1e-3, capped).num_centers() == 100);
    CHECK_THROWS_AS(fit_kernel_logreg(sources, 0.0), ConfigError);
}

TEST_CASE("median pairwise distance") {
    LabeledDataset d(1);
    for (double x : {0.0, 1.0, 3.0}) {
        const double v[] = {x};
        d.add(Label::Positive, v);
    }
    // Distances 1, 2, 3.
    CHECK(median_pairwise_distance(d) == 2.0);
}

TEST_CASE("source classifier json round trips") {
    const auto [target, sources] = gen_four_gaussian(40, 300, 1.0, 4);
    const auto kernel = fit_kernel_logreg(sources, 1e-2);
    const auto linear = fit_logreg(sources, 1e-2);
    const auto k2 = source_classifier_from_json(kernel.to_json());
    const auto l2 = source_classifier_from_json(linear.to_json());
    for (std::size_t i = 0; i < target.size(); ++i) {
        CHECK(k2->prob_positive(target.x(i)) == kernel.prob_positive(target.x(i)));
        CHECK(l2->prob_positive(target.x(i)) == linear.prob_positive(target.x(i)));
    }
    CHECK(k2->kind() == "kernel_logreg");
    CHECK_THROWS(source_classifier_from_json(nlohmann::json{{"kind", "forest"}}));
}

TEST_CASE("l2 cross-validation picks from the grid") {
    const auto [target, sources] = gen_gaussian_shift(60, 10, 5);
    const std::vector<double> grid{1e-3, 1e-1, 10.0};
    const double l2 = select_l2_cv(
        target, grid,
        [](const LabeledDataset& d, double l) { return std::make_shared<LinearLogReg>(fit_logreg(d, l)); },
        1);
    CHECK(std::find(grid.begin(), grid.end(), l2) != grid.end());
    CHECK(l2 != 10.0);
}
