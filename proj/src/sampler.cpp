#include "pflab/sampler.hpp"

#include "pflab/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace pflab {

namespace {
constexpr double k_log_2pi = 1.8378770664093454836;
// |det| below this is treated as a singular step
constexpr double k_det_floor_log = -690.77552789821370521; // log(1e-300)
} // namespace

int TrajectoryBatch::n_flagged() const {
    int c = 0;
    for (auto f : flagged) {
        c += (f != 0);
    }
    return c;
}

Mat forward_sample(const MixtureTarget &target, const Schedule &schedule, int t, int n,
                   std::uint64_t seed) {
    if (t < 1 || t > schedule.T()) {
        throw std::out_of_range("forward_sample: step index out of range");
    }
    const double ab = schedule.alpha_bar_at(t);
    Mat x0 = sample_data(target, n, mix64(seed ^ 0x66777864ULL)); // "fwxd"
    Rng rng = substream(seed, 0x6677646eULL);                     // "fwdn"
    const double sig = std::sqrt(1.0 - ab);
    const double amp = std::sqrt(ab);
    Mat out(n, target.d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < target.d; ++j) {
            out(i, j) = amp * x0(i, j) + sig * rng.normal();
        }
    }
    return out;
}

TrajectoryBatch init_reverse(const Schedule &schedule, int d, int n, std::uint64_t seed) {
    if (n < 1 || d < 1) {
        throw std::invalid_argument("init_reverse: n and d must be >= 1");
    }
    Rng rng = substream(seed, 0x696e6974ULL); // "init"
    TrajectoryBatch b;
    b.t = schedule.T();
    b.points.resize(n, d);
    b.log_density.resize(n);
    b.logdet_accum = Vec::Zero(n);
    b.flagged.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            b.points(i, j) = rng.normal();
        }
        b.log_density(i) = -0.5 * (d * k_log_2pi + b.points.row(i).squaredNorm());
    }
    return b;
}

StepDiag reverse_step(TrajectoryBatch &batch, const ScoreField &field, const Schedule &schedule,
                      CoeffChoice choice) {
    if (batch.t < 2) {
        throw std::invalid_argument("reverse_step: batch must be at t >= 2");
    }
    if (field.dim() != batch.d()) {
        throw std::invalid_argument("reverse_step: field dimension mismatch");
    }
    const int t = batch.t;
    const int d = batch.d();
    const double eta = coefficient(schedule, t, choice);
    const double alpha = schedule.alpha_at(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    const double half_d_log_alpha = 0.5 * d * std::log(alpha);

    // Hoist the determinant when the step Jacobian is point-independent.
    std::optional<Mat> const_j = field.constant_jacobian(t);
    double const_logdet = 0.0;
    bool const_singular = false;
    if (const_j) {
        Mat m = Mat::Identity(d, d) + eta * (*const_j);
        double sign = 0.0;
        bool ok = signed_log_abs_det(m, const_logdet, sign);
        const_singular = !ok || const_logdet < k_det_floor_log;
    }

    StepDiag diag;
    diag.t = t;
    KahanSum abs_sum;
    int n_unflagged = 0;

    for (int i = 0; i < batch.n(); ++i) {
        Vec y = batch.points.row(i).transpose();
        Vec s = field.eval(t, y);

        double logdet_m = 0.0;
        bool singular = false;
        if (const_j) {
            logdet_m = const_logdet;
            singular = const_singular;
        } else {
            Mat m = Mat::Identity(d, d) + eta * field.jacobian(t, y);
            double sign = 0.0;
            bool ok = signed_log_abs_det(m, logdet_m, sign);
            singular = !ok || logdet_m < k_det_floor_log;
        }

        batch.points.row(i) = (inv_sqrt_alpha * (y + eta * s)).transpose();

        if (batch.flagged[i]) {
            continue; // density tracking already stopped for this point
        }
        if (singular) {
            batch.flagged[i] = 1;
            batch.log_density(i) = std::numeric_limits<double>::quiet_NaN();
            ++diag.n_flagged;
            continue;
        }
        // log|det dphi/dx| for the full map phi(y) = (y + eta s)/sqrt(alpha)
        double logdet_phi = logdet_m - half_d_log_alpha;
        batch.logdet_accum(i) += logdet_phi;
        batch.log_density(i) += -logdet_m + half_d_log_alpha;
        abs_sum.add(std::abs(logdet_phi));
        ++n_unflagged;
    }

    batch.t -= 1;
    diag.mean_abs_logdet = n_unflagged > 0 ? abs_sum.value() / n_unflagged : 0.0;
    return diag;
}

TrajectoryBatch run_reverse(const Schedule &schedule, int d, const ScoreField &field, int n,
                            std::uint64_t seed, CoeffChoice choice, ReverseDiagnostics *diag) {
    if (field.dim() != d) {
        throw std::invalid_argument("run_reverse: field dimension mismatch");
    }
    TrajectoryBatch batch = init_reverse(schedule, d, n, seed);
    for (int t = schedule.T(); t >= 2; --t) {
        StepDiag sd = reverse_step(batch, field, schedule, choice);
        if (diag) {
            diag->steps.push_back(sd);
            diag->total_flagged += sd.n_flagged;
        }
    }
    return batch;
}

} // namespace pflab
