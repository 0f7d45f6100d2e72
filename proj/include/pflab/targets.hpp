#pragma once

#include "pflab/linalg.hpp"
#include "pflab/schedule.hpp"

#include <cstdint>
#include <vector>

namespace pflab {

// One mixture component: weight * N(mean, cov_factor * cov_factor^T).
// cov_factor is d x r with r possibly 0 (a point mass).
struct MixtureComponent {
    double weight = 1.0;
    Vec mean;
    Mat cov_factor;

    int rank() const { return static_cast<int>(cov_factor.cols()); }
};

// Finite Gaussian/point-mass mixture target with recorded support radius
// (bound on the component means) and, when the construction knows it, the
// nominal intrinsic dimension of the support structure.
struct MixtureTarget {
    int d = 0;
    std::vector<MixtureComponent> components;
    double support_radius = 0.0;
    int nominal_k = -1; // -1 when the construction does not define one

    int n_components() const { return static_cast<int>(components.size()); }
};

struct NoisedQuery {
    int t = 1;
    Vec x;
};

// Throws std::invalid_argument on violated invariants (weights must sum
// to 1 within 1e-12, means inside support_radius, ranks <= d).
void validate_target(const MixtureTarget &target);

// ---- constructors ----------------------------------------------------

MixtureTarget make_point_mass(int d, const Vec &mean);
// isotropic N(mean, sigma^2 I)
MixtureTarget make_gaussian_iso(int d, const Vec &mean, double sigma);
// zero-mean Gaussian supported on a random k-dim subspace of R^d:
// cov_factor is a seeded orthonormal d x k frame (unit variance in-plane)
MixtureTarget make_rank_k_gaussian(int d, int k, std::uint64_t seed);
MixtureTarget make_gmm(int d, const std::vector<MixtureComponent> &components);

// Seeded random orthonormal d x k frame (QR of a Gaussian matrix with
// sign-fixed diagonal); deterministic in seed.
Mat embed_frame(int d, int k, std::uint64_t seed);

// ---- operations -------------------------------------------------------

// n x d samples from p_data; deterministic given seed.
Mat sample_data(const MixtureTarget &target, int n, std::uint64_t seed);

// log-density of the time-t marginal: sum_i w_i N(sqrt(ab)*mu_i, C_i),
// C_i = ab*Sigma_i + (1-ab) I, evaluated with log-sum-exp.
double log_marginal(const MixtureTarget &target, const Schedule &schedule, const NoisedQuery &q);

// gradient of log_marginal in x
Vec score(const MixtureTarget &target, const Schedule &schedule, const NoisedQuery &q);

// derivative of the score in x (symmetric d x d)
Mat score_jacobian(const MixtureTarget &target, const Schedule &schedule, const NoisedQuery &q);

struct PosteriorMoments {
    Vec mean;  // E[X_0 | X_t = x]
    Mat cov;   // Cov[X_0 | X_t = x]
};

PosteriorMoments posterior_moments(const MixtureTarget &target, const Schedule &schedule,
                                   const NoisedQuery &q);

// CSV component table: component,weight,rank,mean...,  (one row per component)
std::string target_table_csv(const MixtureTarget &target);

} // namespace pflab
