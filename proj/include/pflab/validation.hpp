#pragma once

#include "pflab/linalg.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pflab {

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured_slack = 0.0; // margin by which the check holds (negative on fail)
    std::string context;         // replay info: seed / step / dimensions
};

// log det(I + A) >= Tr(A) - 2||A||_F^2 for ||A|| <= 1/4.
// Throws std::invalid_argument when the spectral-norm precondition fails.
CheckResult check_logdet(const Mat &a);

// Compares sqrt((1-ab)/(a-ab)) * (I + eta*_t J_t(x)) - I against
// (sqrt((1-ab)/(a-ab)) - 1) * (ab/(1-ab)) * Cov0(x), entrywise (Frobenius)
// and in trace, at 1e-8 relative. Residuals below 1e-12*d absolute count
// as exact (both sides vanish for point masses).
CheckResult check_jacobian_identity(const MixtureTarget &target, const Schedule &schedule, int t,
                                    const Vec &x);

struct TraceDiag {
    double value = 0.0;     // MC estimate of sum_{t>=2} E||f_t (ab/(1-ab)) Cov0||_F^2
    double stderr_ = 0.0;
    double reference = 0.0; // k log^2(T)/T for shape comparison
};

// Monte-Carlo estimate of the accumulated squared Frobenius deviation of
// the normalized step Jacobian from the identity, via closed-form Cov0.
// Requires target.nominal_k >= 0 (throws otherwise).
TraceDiag posterior_trace_diagnostic(const MixtureTarget &target, const Schedule &schedule, int n,
                                     std::uint64_t seed);

// Central differences per coordinate; the step used across the project is
// h = 1e-5 * (1 + max|x_i|).
Mat finite_diff_jacobian(const std::function<Vec(const Vec &)> &field_eval, const Vec &x,
                         double h);
Mat finite_diff_jacobian(const ScoreField &field, int t, const Vec &x, double h);
double default_fd_step(const Vec &x);

struct SuiteResult {
    std::string check;
    long trials = 0;
    long failures = 0;
    double max_slack = 0.0; // worst-case margin over all trials
};

// The randomized property suites behind the `validate` subcommand.
std::vector<SuiteResult> run_validation_suite(std::uint64_t seed);

} // namespace pflab
