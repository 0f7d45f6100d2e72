#pragma once

#include "pflab/linalg.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"

#include <cstdint>
#include <vector>

namespace pflab {

// Reverse-process batch at a common step t. log_density tracks
// log p_{Y_t}(point) under the pushforward law; logdet_accum is the
// running sum of log|det dphi_s/dx| over the steps applied so far, so
// log_density = initial gaussian log-density - logdet_accum.
struct TrajectoryBatch {
    int t = 0;
    Mat points;                    // n x d
    Vec log_density;               // n
    Vec logdet_accum;              // n
    std::vector<std::uint8_t> flagged; // per-point near-singular-step flag

    int n() const { return static_cast<int>(points.rows()); }
    int d() const { return static_cast<int>(points.cols()); }
    int n_flagged() const;
};

// n x d samples of X_t = sqrt(ab)*X_0 + sqrt(1-ab)*W; deterministic in seed.
Mat forward_sample(const MixtureTarget &target, const Schedule &schedule, int t, int n,
                   std::uint64_t seed);

// Batch at t = T: i.i.d. standard normal points with exact log-density.
TrajectoryBatch init_reverse(const Schedule &schedule, int d, int n, std::uint64_t seed);

struct StepDiag {
    int t = 0;                    // the step that was applied (t -> t-1)
    double mean_abs_logdet = 0.0; // mean |log det dphi/dx| over unflagged points
    int n_flagged = 0;            // points newly flagged at this step
};

// One deterministic update y -> (y + eta_t s_t(y))/sqrt(alpha_t) with the
// density update  log p_{t-1} = log p_t - log|det(I + eta_t J_t(y))|
//                              + (d/2) log alpha_t.
// Points whose step determinant falls below 1e-300 in absolute value are
// flagged (their density tracking stops; the point itself keeps moving).
StepDiag reverse_step(TrajectoryBatch &batch, const ScoreField &field, const Schedule &schedule,
                      CoeffChoice choice);

struct ReverseDiagnostics {
    std::vector<StepDiag> steps;
    int total_flagged = 0;
};

// Full reverse pass t = T..2, ending at t = 1.
TrajectoryBatch run_reverse(const Schedule &schedule, int d, const ScoreField &field, int n,
                            std::uint64_t seed, CoeffChoice choice,
                            ReverseDiagnostics *diag = nullptr);

} // namespace pflab
