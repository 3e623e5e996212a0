#include "postratio/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace postratio {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kCurvature = 0.9;
constexpr std::size_t kMaxLineSearchEvals = 60;

struct Trial {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;
};

class LineSearch {
public:
    LineSearch(const SmoothObjective& f, const Vector& x, const Vector& dir, double f0, double d0)
        : f_(f), x_(x), dir_(dir), f0_(f0), d0_(d0), grad_(x.size()), trial_x_(x.size()) {}

    /// Returns true with the accepted point stored in x_out/g_out/f_out.
    bool run(double alpha, Vector& x_out, Vector& g_out, double& f_out) {
        Trial prev{0.0, f0_, d0_};
        for (std::size_t i = 0; i < kMaxLineSearchEvals; ++i) {
            Trial t = eval(alpha);
            if (!std::isfinite(t.value)) {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if (acceptable(t)) return accept(t, x_out, g_out, f_out);
            if (t.value > f0_ + kArmijo * t.alpha * d0_ || (i > 0 && t.value >= prev.value))
                return zoom(prev, t, x_out, g_out, f_out);
            if (t.slope >= 0.0) return zoom(t, prev, x_out, g_out, f_out);
            prev = t;
            alpha *= 2.0;
        }
        return false;
    }

private:
    Trial eval(double alpha) {
        trial_x_ = x_ + alpha * dir_;
        const double value = f_(trial_x_, grad_);
        ++evals_;
        last_alpha_ = alpha;
        return {alpha, value, grad_.dot(dir_)};
    }

    bool strong_wolfe(const Trial& t) const {
        return t.value <= f0_ + kArmijo * t.alpha * d0_ && std::abs(t.slope) <= -kCurvature * d0_;
    }

    // Hager-Zhang approximate Wolfe conditions, used once the decrease is
    // below what double precision can resolve.
    bool approximately_wolfe(const Trial& t) const {
        const double eps = 1e-12 * (1.0 + std::abs(f0_));
        return t.value <= f0_ + eps && t.slope >= kCurvature * d0_ && t.slope <= -0.8 * d0_;
    }

    bool acceptable(const Trial& t) const { return strong_wolfe(t) || approximately_wolfe(t); }

    bool accept(const Trial& t, Vector& x_out, Vector& g_out, double& f_out) {
        if (last_alpha_ != t.alpha) eval(t.alpha);
        x_out = trial_x_;
        g_out = grad_;
        f_out = t.value;
        return true;
    }

    bool zoom(Trial lo, Trial hi, Vector& x_out, Vector& g_out, double& f_out) {
        for (std::size_t i = 0; i < kMaxLineSearchEvals; ++i) {
            const double a = interpolate(lo, hi);
            Trial t = eval(a);
            if (std::isfinite(t.value) && acceptable(t)) return accept(t, x_out, g_out, f_out);
            if (!std::isfinite(t.value) || t.value > f0_ + kArmijo * a * d0_ ||
                t.value >= lo.value) {
                hi = t;
            } else {
                if (t.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = t;
            }
            if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) break;
        }
        // Settle for the best sufficient-decrease point, if any.
        if (lo.alpha > 0.0 && lo.value < f0_) return accept(lo, x_out, g_out, f_out);
        return false;
    }

    static double interpolate(const Trial& lo, const Trial& hi) {
        const double a0 = lo.alpha, a1 = hi.alpha;
        const double lower = std::min(a0, a1), upper = std::max(a0, a1);
        const double width = upper - lower;
        double a = 0.5 * (a0 + a1);
        if (std::isfinite(hi.value)) {
            const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a0 - a1);
            const double disc = d1 * d1 - lo.slope * hi.slope;
            if (disc >= 0.0) {
                const double d2 = std::copysign(std::sqrt(disc), a1 - a0);
                const double cubic =
                    a1 - (a1 - a0) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
                if (std::isfinite(cubic) && cubic > lower + 0.1 * width &&
                    cubic < upper - 0.1 * width)
                    a = cubic;
            }
        }
        return a;
    }

    const SmoothObjective& f_;
    const Vector& x_;
    const Vector& dir_;
    double f0_;
    double d0_;
    Vector grad_;
    Vector trial_x_;
    double last_alpha_ = std::numeric_limits<double>::quiet_NaN();
    std::size_t evals_ = 0;
};

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

OptimResult minimize_lbfgs(const SmoothObjective& f, Vector x0, const OptimOptions& options) {
    OptimResult result;
    result.x = std::move(x0);
    Vector g(result.x.size());
    result.value = f(result.x, g);
    result.gradient_norm = inf_norm(g);

    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;
    Vector dir(result.x.size()), x_new(result.x.size()), g_new(result.x.size());
    std::vector<double> alpha_buf;

    while (result.gradient_norm > options.gradient_tolerance &&
           result.iterations < options.max_iterations) {
        // Two-loop recursion.
        dir = -g;
        const std::size_t m = s_hist.size();
        alpha_buf.assign(m, 0.0);
        for (std::size_t i = m; i-- > 0;) {
            alpha_buf[i] = rho_hist[i] * s_hist[i].dot(dir);
            dir -= alpha_buf[i] * y_hist[i];
        }
        if (m > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(dir);
            dir += (alpha_buf[i] - beta) * s_hist[i];
        }

        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            s_hist.clear(), y_hist.clear(), rho_hist.clear();
            dir = -g;
            slope = g.dot(dir);
        }
        const double step0 = m == 0 ? std::min(1.0, 1.0 / g.norm()) : 1.0;

        LineSearch search(f, result.x, dir, result.value, slope);
        double f_new = 0.0;
        if (!search.run(step0, x_new, g_new, f_new)) {
            if (m == 0) break;
            // Retry from steepest descent with a fresh memory.
            s_hist.clear(), y_hist.clear(), rho_hist.clear();
            continue;
        }

        Vector s = x_new - result.x;
        Vector y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-16 * s.norm() * y.norm()) {
            if (s_hist.size() == options.history) {
                s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }
        result.x = x_new;
        g = g_new;
        result.value = f_new;
        result.gradient_norm = inf_norm(g);
        ++result.iterations;
    }
    result.converged = result.gradient_norm <= options.gradient_tolerance;
    return result;
}

namespace {

// prox of t * weight * ||.||_2
Vector block_shrink(const Vector& v, double threshold) {
    const double norm = v.norm();
    if (norm <= threshold) return Vector::Zero(v.size());
    return (1.0 - threshold / norm) * v;
}

}  // namespace

OptimResult minimize_group_l2(const SmoothObjective& f, double weight, Vector x0,
                              const OptimOptions& options) {
    const auto n = x0.size();
    OptimResult result;
    Vector x = std::move(x0), y = x, g(n), gy(n), x_next(n);
    double lipschitz = 1.0;
    double momentum = 1.0;
    double fx = f(x, g);
    auto total = [&](double smooth, const Vector& p) { return smooth + weight * p.norm(); };
    double fx_total = total(fx, x);

    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        const double fy = f(y, gy);
        // Backtracking on the local Lipschitz estimate.
        double f_next = 0.0;
        Vector g_next(n);
        for (int bt = 0; bt < 100; ++bt) {
            x_next = block_shrink(y - gy / lipschitz, weight / lipschitz);
            f_next = f(x_next, g_next);
            const Vector diff = x_next - y;
            if (f_next <= fy + gy.dot(diff) + 0.5 * lipschitz * diff.squaredNorm() +
                              1e-15 * std::abs(fy))
                break;
            lipschitz *= 2.0;
        }
        double next_total = total(f_next, x_next);
        if (next_total > fx_total) {
            // Restart momentum when the accelerated step fails to descend.
            momentum = 1.0;
            y = x;
            if (it > 0) continue;
        }
        const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        y = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x);
        momentum = momentum_next;
        x = x_next;
        fx = f_next;
        g = g_next;
        fx_total = next_total;
        result.iterations = it + 1;

        // Gradient mapping at x.
        const Vector mapped = block_shrink(x - g / lipschitz, weight / lipschitz);
        result.gradient_norm = inf_norm(lipschitz * (x - mapped));
        if (result.gradient_norm <= options.gradient_tolerance) break;
        lipschitz = std::max(lipschitz * 0.9, 1e-12);
    }
    result.x = x;
    result.value = fx_total;
    result.converged = result.gradient_norm <= options.gradient_tolerance;
    return result;
}

}  // namespace postratio
