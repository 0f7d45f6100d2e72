#pragma once

#include "pflab/linalg.hpp"

#include <cstdint>
#include <vector>

namespace pflab {

// Farthest-point greedy net: starts from index 0, repeatedly adds the
// point farthest from the current centers until all points lie within
// epsilon of some center. The result is epsilon-separated, so its size is
// sandwiched between the packing number at epsilon and the covering
// number at epsilon/2.
std::vector<int> greedy_net(const Mat &points, double epsilon);

struct CoveringCurve {
    std::vector<double> epsilons;     // strictly decreasing
    std::vector<double> log_counts;   // log |greedy net| per epsilon
    std::vector<double> lower_bounds; // log |2-epsilon-separated set| (<= log N_eps)
};

CoveringCurve covering_curve(const Mat &points, const std::vector<double> &epsilons);

struct DimEstimate {
    double k_hat = 0.0;
    bool flat = false; // all counts equal; slope meaningless
};

// Least-squares slope of log N_eps against log(1/eps).
DimEstimate dimension_estimate(const CoveringCurve &curve);

// ---- synthetic clouds ---------------------------------------------------

// Uniform sample of the k-cube [0, side]^k (n x k).
Mat cube_cloud(int k, int n, double side, std::uint64_t seed);

// Uniform sample of a product of k circles of the given radius in R^{2k}
// (n x 2k). Boundary-free, so covering counts scale cleanly with radius.
Mat torus_cloud(int k, int n, double radius, std::uint64_t seed);

// Isometric embedding into R^d by a seeded orthonormal frame (n x d).
Mat embed_cloud(const Mat &low, int d, std::uint64_t seed);

} // namespace pflab
