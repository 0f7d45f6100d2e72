#pragma once

#include "pflab/linalg.hpp"
#include "pflab/schedule.hpp"
#include "pflab/targets.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace pflab {

// Evaluable score field s_t(x) with its Jacobian. Implementations must be
// pure and deterministic in (t, x).
class ScoreField {
public:
    virtual ~ScoreField() = default;
    virtual int dim() const = 0;
    virtual Vec eval(int t, const Vec &x) const = 0;
    virtual Mat jacobian(int t, const Vec &x) const = 0;
    // When the Jacobian at step t does not depend on x (e.g. a single
    // Gaussian component), returns it once so per-point factorizations can
    // be hoisted; otherwise nullopt.
    virtual std::optional<Mat> constant_jacobian(int /*t*/) const { return std::nullopt; }
    virtual std::string descriptor() const = 0;
};

// Exact mixture score with all per-step quantities precomputed at
// construction (Cholesky factor, inverse, log-det per component and step).
class ExactScoreField : public ScoreField {
public:
    ExactScoreField(const MixtureTarget &target, const Schedule &schedule);

    int dim() const override { return m_target.d; }
    Vec eval(int t, const Vec &x) const override;
    Mat jacobian(int t, const Vec &x) const override;
    std::optional<Mat> constant_jacobian(int t) const override;
    std::string descriptor() const override { return "exact"; }

    // log p_{X_t}(x) from the same cached factorizations
    double log_marginal(int t, const Vec &x) const;
    const MixtureTarget &target() const { return m_target; }
    const Schedule &schedule() const { return m_schedule; }

private:
    struct CachedComponent {
        Vec m;               // sqrt(ab)*mu
        Mat chol_l;          // lower Cholesky factor of C
        Mat c_inv;
        double log_norm;     // log w - (d log 2pi + log det C)/2
    };
    const std::vector<CachedComponent> &step(int t) const;

    MixtureTarget m_target;
    Schedule m_schedule;
    std::vector<std::vector<CachedComponent>> m_steps; // [t-1][component]
};

enum class PerturbKind { none, constant_bias, tangential, gain, smooth_field };

const char *perturb_kind_name(PerturbKind k);
PerturbKind perturb_kind_from_name(const std::string &name);

struct PerturbationSpec {
    PerturbKind kind = PerturbKind::none;
    double delta = 0.0;
    std::uint64_t seed = 0;
};

// Wraps a field with s(x) = s*(x) + delta*u(x) and the matching analytic
// Jacobian; the exact kinds are documented per member in the source.
std::shared_ptr<const ScoreField> perturb(std::shared_ptr<const ScoreField> base,
                                          const PerturbationSpec &spec);

// eps_score,t(x): sqrt(||ds||^2 + (ds . s*)^2) with ds = s_approx - s_exact
double pointwise_score_error(const ScoreField &exact, const ScoreField &approx, int t,
                             const Vec &x);

// eps_Jacobi,t(x): sqrt(Tr(dJ)^2 + ||dJ||_F^2)
double pointwise_jacobi_error(const ScoreField &exact, const ScoreField &approx, int t,
                              const Vec &x);

struct AverageErrors {
    double eps_score = 0.0;
    double eps_score_stderr = 0.0;
    double eps_jacobi = 0.0;
    double eps_jacobi_stderr = 0.0;
};

// Monte-Carlo estimate of the time-averaged error functionals
// eps^2 = (1/T) sum_t E[eps_t(X_t)^2] over fresh forward samples at every
// step (n per step). Standard errors are propagated to the root scale.
AverageErrors average_errors(const ScoreField &exact, const ScoreField &approx,
                             const MixtureTarget &target, const Schedule &schedule, int n,
                             std::uint64_t seed);

} // namespace pflab
