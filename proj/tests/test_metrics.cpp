#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pflab/metrics.hpp"
#include "pflab/sampler.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"

#include <cmath>
#include <limits>

using namespace pflab;

TEST_CASE("monte carlo tv on an exactly transported point mass is tiny") {
    // with the variance-matched coefficient the reverse flow maps the
    // standard normal onto the time-1 marginal up to the initialization
    // mismatch alpha_bar_T ~ 1e-4, so tv must come out far below 0.02
    Schedule s = build_schedule({50, 2.0, 4.0});
    int d = 4, n = 2000;
    MixtureTarget pm = make_point_mass(d, Vec::Zero(d));
    ExactScoreField field(pm, s);
    TrajectoryBatch out = run_reverse(s, d, field, n, 12, CoeffChoice::star);
    TvEstimate tv = tv_monte_carlo(out, pm, s);
    CHECK(tv.n_used == n);
    CHECK(tv.n_flagged == 0);
    CHECK(tv.value >= 0.0);
    CHECK(tv.value <= 0.02);
}

TEST_CASE("monte carlo tv matches the analytic gaussian tv oracle") {
    // generate from a point mass (exactly gaussian output law) but
    // evaluate against a different gaussian target; both time-1 laws are
    // then known in closed form and tv has an analytic value
    Schedule s = build_schedule({60, 2.0, 4.0});
    int n = 4000;
    MixtureTarget gen_target = make_point_mass(1, Vec::Zero(1));
    ExactScoreField field(gen_target, s);
    TrajectoryBatch out = run_reverse(s, 1, field, n, 31, CoeffChoice::star);

    double m = 0.5, sig = 1.0;
    MixtureTarget eval_target = make_gaussian_iso(1, Vec::Constant(1, m), sig);
    TvEstimate tv = tv_monte_carlo(out, eval_target, s);

    oracles::AffineLaw law = oracles::reverse_affine_recursion(s, 0.0, CoeffChoice::star);
    double ab1 = s.alpha_bar_at(1);
    double want = oracles::gaussian_tv(0.0, std::sqrt(law.var), std::sqrt(ab1) * m,
                                       std::sqrt(ab1 * sig * sig + 1.0 - ab1));
    CHECK(std::abs(tv.value - want) <= 3.0 * tv.stderr_ + 1e-9);
    CHECK(tv.stderr_ > 0.0);
}

TEST_CASE("monte carlo tv input validation") {
    Schedule s = build_schedule({30, 2.0, 4.0});
    MixtureTarget pm = make_point_mass(2, Vec::Zero(2));

    TrajectoryBatch b = init_reverse(s, 2, 10, 1); // still at t = T
    CHECK_THROWS_AS(tv_monte_carlo(b, pm, s), std::invalid_argument);

    b.t = 1;
    std::fill(b.flagged.begin(), b.flagged.end(), 1);
    CHECK_THROWS_AS(tv_monte_carlo(b, pm, s), std::runtime_error);
}

TEST_CASE("flagged points are excluded and counted") {
    Schedule s = build_schedule({30, 2.0, 4.0});
    MixtureTarget pm = make_point_mass(2, Vec::Zero(2));
    ExactScoreField field(pm, s);
    TrajectoryBatch out = run_reverse(s, 2, field, 50, 2, CoeffChoice::star);
    out.flagged[3] = 1;
    out.flagged[17] = 1;
    TvEstimate tv = tv_monte_carlo(out, pm, s);
    CHECK(tv.n_used == 48);
    CHECK(tv.n_flagged == 2);
}

TEST_CASE("below-resolution flag compares value with twice the stderr") {
    TvEstimate a{1e-6, 1e-6, 100, 0};
    CHECK(a.below_resolution());
    TvEstimate b{0.5, 0.01, 100, 0};
    CHECK_FALSE(b.below_resolution());
}

TEST_CASE("1-d quadrature reproduces frozen gaussian tv values") {
    // frozen against an independent closed-form evaluation (piecewise
    // gaussian cdf differences at the density crossing points)
    struct Pair {
        double m1, s1, m2, s2, tv;
    };
    const Pair pairs[] = {
        {0.0, 1.0, 0.5, 1.0, 0.197412651366},
        {0.0, 1.0, 1.0, 1.0, 0.382924922548},
        {0.0, 1.0, 0.0, 2.0, 0.322674568835},
        {0.0, 1.0, 0.5, 1.5, 0.237780600339},
        {1.0, 0.5, 0.0, 1.0, 0.546611865187},
    };
    GridSpec grid;
    grid.lo = -12.0;
    grid.hi = 12.0;
    for (const Pair &p : pairs) {
        auto pa = [&](double x) { return oracles::normal_pdf(x, p.m1, p.s1); };
        auto pb = [&](double x) { return oracles::normal_pdf(x, p.m2, p.s2); };
        double quad = tv_quadrature_1d(pa, pb, grid);
        CHECK(std::abs(quad - p.tv) <= 1e-6);
        CHECK(std::abs(quad - oracles::gaussian_tv(p.m1, p.s1, p.m2, p.s2)) <= 1e-6);
    }
}

TEST_CASE("quadrature of identical densities is zero") {
    GridSpec grid;
    grid.lo = -8.0;
    grid.hi = 8.0;
    auto p = [](double x) { return oracles::normal_pdf(x, 0.0, 1.0); };
    CHECK(tv_quadrature_1d(p, p, grid) <= 1e-12);
}

TEST_CASE("quadrature refuses grids it cannot resolve") {
    // a near-delta spike keeps the trapezoid estimate halving forever
    GridSpec grid;
    grid.lo = -1.0;
    grid.hi = 1.0;
    auto spike = [](double x) { return oracles::normal_pdf(x, 0.0, 1e-12); };
    auto flat = [](double x) { return oracles::normal_pdf(x, 0.0, 1.0); };
    CHECK_THROWS_AS(tv_quadrature_1d(spike, flat, grid), std::runtime_error);
    GridSpec bad;
    bad.lo = 1.0;
    bad.hi = 0.0;
    CHECK_THROWS_AS(tv_quadrature_1d(flat, flat, bad), std::invalid_argument);
}

TEST_CASE("rate fit recovers an exact power law") {
    std::vector<std::pair<double, double>> pts;
    for (double T : {50.0, 100.0, 200.0, 400.0, 800.0}) {
        pts.emplace_back(T, 3.0 * std::pow(T, -0.8));
    }
    RateFit fit = rate_fit(pts);
    CHECK(fit.slope == doctest::Approx(-0.8).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.points.size() == 5);
}

TEST_CASE("rate fit of the theoretical profile, frozen") {
    // k log^3(T)/T over T in {50..1600} is visibly shallower than 1/T on a
    // log-log plot at desk scale; these digits pin the honest fit
    std::vector<std::pair<double, double>> pts;
    for (double T : {50.0, 100.0, 200.0, 400.0, 800.0, 1600.0}) {
        double lt = std::log(T);
        pts.emplace_back(T, 4.0 * lt * lt * lt / T);
    }
    RateFit fit = rate_fit(pts);
    CHECK(fit.slope == doctest::Approx(-0.454301606002).epsilon(1e-9));
    CHECK(fit.r_squared == doctest::Approx(0.987759892955).epsilon(1e-9));
}

TEST_CASE("rate fit input validation") {
    std::vector<std::pair<double, double>> two_distinct = {
        {100.0, 0.5}, {100.0, 0.4}, {200.0, 0.3}};
    CHECK_THROWS_AS(rate_fit(two_distinct), std::invalid_argument);

    std::vector<std::pair<double, double>> nonpositive = {
        {100.0, 0.5}, {200.0, 0.0}, {400.0, 0.1}};
    CHECK_THROWS_AS(rate_fit(nonpositive), std::invalid_argument);
    try {
        rate_fit(nonpositive);
    } catch (const std::invalid_argument &e) {
        CHECK(std::string(e.what()).find("floor") != std::string::npos);
    }
}

TEST_CASE("theorem bound values and vacuity") {
    BoundValue big = theorem_bound(4.0, 32.0, 1000.0, 0.0, 0.0, 1.0);
    CHECK(big.value == doctest::Approx(2.460840428777).epsilon(1e-9));
    CHECK(big.vacuous);

    BoundValue small = theorem_bound(4.0, 32.0, 1000.0, 0.0, 0.0, 0.01);
    CHECK(small.value == doctest::Approx(0.024608404288).epsilon(1e-8));
    CHECK_FALSE(small.vacuous);

    // the error terms enter linearly with a log(T) weight
    BoundValue withe = theorem_bound(4.0, 32.0, 1000.0, 0.1, 0.05, 0.01);
    CHECK(withe.value ==
          doctest::Approx(small.value + 0.01 * 0.15 * std::log(1000.0)).epsilon(1e-12));

    CHECK_THROWS_AS(theorem_bound(-1.0, 32.0, 1000.0, 0.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound(4.0, 32.0, 1.0, 0.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound(4.0, 32.0, 1000.0, -0.1, 0.0, 1.0), std::invalid_argument);
}
