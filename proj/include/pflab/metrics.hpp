#pragma once

#include "pflab/linalg.hpp"
#include "pflab/sampler.hpp"
#include "pflab/schedule.hpp"
#include "pflab/targets.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace pflab {

struct TvEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    int n_used = 0;
    int n_flagged = 0;

    // noise-dominated estimates are excluded from rate fits
    bool below_resolution() const { return value < 2.0 * stderr_; }
};

// One-sided TV estimator from the generated side:
//   TV = E_{Y_1}[ max(0, 1 - p_{X_1}(Y)/p_{Y_1}(Y)) ]
// using the batch's tracked log-densities for p_{Y_1} and the closed-form
// time-1 marginal for p_{X_1}. Flagged points are excluded and counted.
// Throws std::runtime_error when every point is flagged. Compensated
// summation keeps the value permutation-invariant to a few ulps.
TvEstimate tv_monte_carlo(const TrajectoryBatch &batch, const MixtureTarget &target,
                          const Schedule &schedule);

struct GridSpec {
    double lo = 0.0;
    double hi = 1.0;
    int initial_intervals = 64;
    double abs_tol = 1e-6;
    int max_refinements = 16;
};

// (1/2) integral |p_a - p_b| by trapezoid rule with interval doubling until
// two consecutive refinements agree within abs_tol; throws
// std::runtime_error("non-convergent-grid ...") when refinement fails.
double tv_quadrature_1d(const std::function<double(double)> &density_a,
                        const std::function<double(double)> &density_b, const GridSpec &grid);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<std::pair<double, double>> points; // (T, tv) pairs used
};

// Least squares of log(tv) on log(T). Requires >= 3 distinct T and all
// tv > 0 (throws std::invalid_argument otherwise; callers floor noisy tv
// at its standard error first).
RateFit rate_fit(const std::vector<std::pair<double, double>> &points);

struct BoundValue {
    double value = 0.0;
    bool vacuous = false; // value > 1 carries no information for a TV bound
};

// c*(k + ln d)*ln^3(T)/T + c*(eps_score + eps_jacobi)*ln(T)
BoundValue theorem_bound(double k, double d, double T, double eps_score, double eps_jacobi,
                         double c);

} // namespace pflab
