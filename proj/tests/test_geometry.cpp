#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pflab/geometry.hpp"
#include "pflab/rng.hpp"

#include <cmath>
#include <set>

using namespace pflab;

namespace {

Mat grid_1d(int n, double lo, double hi) {
    Mat m(n, 1);
    for (int i = 0; i < n; ++i) {
        m(i, 0) = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    }
    return m;
}

double mean_khat_over_seeds(int k, int n, double radius, const std::vector<double> &eps,
                            int d_embed) {
    double acc = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Mat low = torus_cloud(k, n, radius, seed);
        Mat cloud = embed_cloud(low, d_embed, 100 + seed);
        DimEstimate est = dimension_estimate(covering_curve(cloud, eps));
        acc += est.k_hat;
    }
    return acc / 5.0;
}

} // namespace

TEST_CASE("greedy net on a uniform 1-d grid, frozen and sandwiched") {
    // 101 equally spaced points on [0, 1]; the optimal interval cover at
    // eps = 0.1 needs 5 balls, and the greedy net size is sandwiched by
    // cover(eps) <= |net| <= cover(eps/2)
    Mat pts = grid_1d(101, 0.0, 1.0);
    std::vector<int> net = greedy_net(pts, 0.1);
    CHECK(net.size() == 9); // frozen: greedy from the left endpoint

    std::vector<double> xs(101);
    for (int i = 0; i < 101; ++i) xs[i] = pts(i, 0);
    int cover = oracles::interval_cover_count(xs, 0.1);
    int cover_half = oracles::interval_cover_count(xs, 0.05);
    CHECK(cover == 5);
    CHECK(static_cast<int>(net.size()) >= cover);
    CHECK(static_cast<int>(net.size()) <= cover_half);
}

TEST_CASE("greedy net covers and is separated") {
    Rng rng(8);
    Mat pts(300, 3);
    for (int i = 0; i < 300; ++i) {
        for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal();
    }
    double eps = 0.9;
    std::vector<int> net = greedy_net(pts, eps);
    REQUIRE(!net.empty());
    CHECK(net.front() == 0); // deterministic start

    // coverage: every point within eps of some center
    for (int i = 0; i < 300; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int c : net) {
            best = std::min(best, (pts.row(i) - pts.row(c)).norm());
        }
        CHECK(best <= eps + 1e-12);
    }
    // separation: centers pairwise more than eps apart
    for (std::size_t a = 0; a < net.size(); ++a) {
        for (std::size_t b = a + 1; b < net.size(); ++b) {
            CHECK((pts.row(net[a]) - pts.row(net[b])).norm() > eps);
        }
    }
}

TEST_CASE("covering curve shape and lower bounds") {
    Rng rng(3);
    Mat pts(400, 2);
    for (int i = 0; i < 400; ++i) {
        for (int j = 0; j < 2; ++j) pts(i, j) = rng.uniform();
    }
    std::vector<double> eps = {0.4, 0.2, 0.1, 0.05};
    CoveringCurve curve = covering_curve(pts, eps);
    REQUIRE(curve.epsilons == eps);
    REQUIRE(curve.log_counts.size() == 4);
    REQUIRE(curve.lower_bounds.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        // |net at 2 eps| <= |net at eps|
        CHECK(curve.lower_bounds[i] <= curve.log_counts[i] + 1e-12);
        if (i > 0) CHECK(curve.log_counts[i] >= curve.log_counts[i - 1] - 1e-12);
    }
    CHECK_THROWS_AS(covering_curve(pts, std::vector<double>{0.1, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(covering_curve(pts, std::vector<double>{0.2, 0.2}), std::invalid_argument);
}

TEST_CASE("dimension estimate is the log-log slope") {
    // synthetic exact curve log N = k log(1/eps) + const
    CoveringCurve curve;
    curve.epsilons = {0.8, 0.4, 0.2, 0.1};
    for (double e : curve.epsilons) {
        curve.log_counts.push_back(2.5 * std::log(1.0 / e) + 0.7);
        curve.lower_bounds.push_back(0.0);
    }
    DimEstimate est = dimension_estimate(curve);
    CHECK_FALSE(est.flat);
    CHECK(est.k_hat == doctest::Approx(2.5).epsilon(1e-12));

    CoveringCurve flat;
    flat.epsilons = {0.8, 0.4};
    flat.log_counts = {std::log(7.0), std::log(7.0)};
    flat.lower_bounds = {0.0, 0.0};
    DimEstimate fe = dimension_estimate(flat);
    CHECK(fe.flat);
    CHECK(fe.k_hat == 0.0);
}

TEST_CASE("synthetic clouds: shapes, ranges, determinism") {
    Mat cube = cube_cloud(3, 500, 2.0, 9);
    REQUIRE(cube.rows() == 500);
    REQUIRE(cube.cols() == 3);
    CHECK(cube.minCoeff() >= 0.0);
    CHECK(cube.maxCoeff() <= 2.0);
    CHECK((cube - cube_cloud(3, 500, 2.0, 9)).norm() == 0.0);

    Mat torus = torus_cloud(2, 300, 1.5, 4);
    REQUIRE(torus.rows() == 300);
    REQUIRE(torus.cols() == 4);
    for (int i = 0; i < 300; ++i) {
        // each circle pair sits exactly on its radius
        CHECK(torus.row(i).segment(0, 2).norm() == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(torus.row(i).segment(2, 2).norm() == doctest::Approx(1.5).epsilon(1e-12));
    }
}

TEST_CASE("embedding preserves pairwise distances") {
    Mat low = torus_cloud(2, 50, 1.0, 7);
    Mat hi = embed_cloud(low, 32, 13);
    REQUIRE(hi.rows() == 50);
    REQUIRE(hi.cols() == 32);
    for (int i = 0; i < 50; i += 7) {
        for (int j = i + 1; j < 50; j += 11) {
            double dl = (low.row(i) - low.row(j)).norm();
            double dh = (hi.row(i) - hi.row(j)).norm();
            CHECK(std::abs(dl - dh) <= 1e-10 * (1.0 + dl));
        }
    }
}

TEST_CASE("torus clouds recover their intrinsic dimension") {
    // boundary-free product-of-circles clouds; ladders chosen inside each
    // cloud's scaling window at these sample sizes
    double k1 = mean_khat_over_seeds(1, 2000, 1.0, {0.8, 0.4, 0.2, 0.1}, 16);
    CHECK(std::abs(k1 - 1.0) <= 0.7);

    double k2 = mean_khat_over_seeds(2, 4000, 1.0, {0.8, 0.6, 0.4, 0.3}, 16);
    CHECK(std::abs(k2 - 2.0) <= 0.7);

    double k4 = mean_khat_over_seeds(4, 8000, 1.0, {1.6, 1.3, 1.0, 0.8}, 16);
    CHECK(std::abs(k4 - 4.0) <= 0.7);
}

TEST_CASE("cube clouds understate dimension at desk scale") {
    // at reachable sample sizes the boundary of a 4-cube biases the
    // covering slope well below 4; this pins the honest behavior so a
    // future regression (or improvement) is visible
    Mat cloud = embed_cloud(cube_cloud(4, 8000, 1.0, 21), 32, 22);
    DimEstimate est =
        dimension_estimate(covering_curve(cloud, {0.36, 0.28, 0.22, 0.17}));
    CHECK(est.k_hat >= 2.2);
    CHECK(est.k_hat <= 3.2);
}
