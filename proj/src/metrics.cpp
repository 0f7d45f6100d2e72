#include "pflab/metrics.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace pflab {

TvEstimate tv_monte_carlo(const TrajectoryBatch &batch, const MixtureTarget &target,
                          const Schedule &schedule) {
    if (batch.t != 1) {
        throw std::invalid_argument("tv_monte_carlo: batch must be at t = 1");
    }
    std::vector<double> w;
    w.reserve(batch.n());
    for (int i = 0; i < batch.n(); ++i) {
        if (batch.flagged[i]) {
            continue;
        }
        NoisedQuery q{1, batch.points.row(i).transpose()};
        double log_px = log_marginal(target, schedule, q);
        double ratio = std::exp(log_px - batch.log_density(i));
        w.push_back(std::max(0.0, 1.0 - ratio));
    }
    if (w.empty()) {
        throw std::runtime_error("tv_monte_carlo: all points flagged");
    }
    MeanVar mv = mean_var(w);
    TvEstimate tv;
    tv.value = mv.mean;
    tv.stderr_ = w.size() > 1 ? std::sqrt(mv.var / static_cast<double>(w.size())) : 0.0;
    tv.n_used = static_cast<int>(w.size());
    tv.n_flagged = batch.n() - tv.n_used;
    return tv;
}

double tv_quadrature_1d(const std::function<double(double)> &density_a,
                        const std::function<double(double)> &density_b, const GridSpec &grid) {
    if (!(grid.hi > grid.lo) || grid.initial_intervals < 1) {
        throw std::invalid_argument("tv_quadrature_1d: invalid grid");
    }
    auto f = [&](double x) { return 0.5 * std::abs(density_a(x) - density_b(x)); };

    long n = grid.initial_intervals;
    double h = (grid.hi - grid.lo) / static_cast<double>(n);
    KahanSum s;
    s.add(0.5 * f(grid.lo));
    s.add(0.5 * f(grid.hi));
    for (long i = 1; i < n; ++i) {
        s.add(f(grid.lo + h * static_cast<double>(i)));
    }
    double integral = s.value() * h;

    for (int r = 0; r < grid.max_refinements; ++r) {
        // refine by interval halving, reusing previous evaluations:
        // I_{2n} = I_n/2 + h/2 * sum of midpoints
        KahanSum mid;
        for (long i = 0; i < n; ++i) {
            mid.add(f(grid.lo + h * (static_cast<double>(i) + 0.5)));
        }
        double next = 0.5 * integral + 0.5 * h * mid.value();
        n *= 2;
        h *= 0.5;
        bool done = std::abs(next - integral) <= 0.5 * grid.abs_tol;
        integral = next;
        if (done) {
            return integral;
        }
    }
    throw std::runtime_error("non-convergent-grid: trapezoid refinement did not stabilize");
}

RateFit rate_fit(const std::vector<std::pair<double, double>> &points) {
    std::set<double> distinct;
    for (const auto &[T, tv] : points) {
        if (tv <= 0.0) {
            throw std::invalid_argument("rate_fit: degenerate-input, tv must be positive "
                                        "(floor noisy values at their stderr)");
        }
        distinct.insert(T);
    }
    if (distinct.size() < 3) {
        throw std::invalid_argument("rate_fit: need at least 3 distinct T");
    }
    const auto m = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto &[T, tv] : points) {
        sx += std::log(T);
        sy += std::log(tv);
    }
    double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0;
    for (const auto &[T, tv] : points) {
        double dx = std::log(T) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(tv) - my);
    }
    RateFit fit;
    fit.points = points;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto &[T, tv] : points) {
        double y = std::log(tv);
        double yh = fit.intercept + fit.slope * std::log(T);
        ss_res += (y - yh) * (y - yh);
        ss_tot += (y - my) * (y - my);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

BoundValue theorem_bound(double k, double d, double T, double eps_score, double eps_jacobi,
                         double c) {
    if (k < 0.0 || d < 1.0 || T < 2.0 || eps_score < 0.0 || eps_jacobi < 0.0 || c < 0.0) {
        throw std::invalid_argument("theorem_bound: inputs out of range");
    }
    double lt = std::log(T);
    BoundValue out;
    out.value = c * (k + std::log(d)) * lt * lt * lt / T + c * (eps_score + eps_jacobi) * lt;
    out.vacuous = out.value > 1.0;
    return out;
}

} // namespace pflab
