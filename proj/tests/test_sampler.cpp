#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pflab/sampler.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"

#include <cmath>
#include <limits>

using namespace pflab;

namespace {

// zero drift with a point-independent Jacobian -1/eta * I at one chosen
// step, which makes I + eta*J exactly singular there
struct SingularAt : ScoreField {
    int d_ = 2;
    int trip_t = 0;
    double trip_eta = 0.0;

    int dim() const override { return d_; }
    Vec eval(int, const Vec &x) const override { return Vec::Zero(x.size()); }
    Mat jacobian(int t, const Vec &x) const override {
        if (t == trip_t) return -Mat::Identity(x.size(), x.size()) / trip_eta;
        return Mat::Zero(x.size(), x.size());
    }
    std::optional<Mat> constant_jacobian(int t) const override {
        Vec probe = Vec::Zero(d_);
        return jacobian(t, probe);
    }
    std::string descriptor() const override { return "singular-at"; }
};

} // namespace

TEST_CASE("forward samples have the closed-form noised moments") {
    Schedule s = build_schedule({120, 2.0, 4.0});
    int d = 4, n = 20000, t = 45;
    Vec mu = Vec::Constant(d, 0.5);
    MixtureTarget target = make_gaussian_iso(d, mu, 0.8);
    Mat x = forward_sample(target, s, t, n, 77);
    REQUIRE(x.rows() == n);
    REQUIRE(x.cols() == d);

    double ab = s.alpha_bar_at(t);
    double want_mean = std::sqrt(ab) * 0.5;
    double want_var = ab * 0.64 + (1.0 - ab);
    for (int j = 0; j < d; ++j) {
        MeanVar mv = mean_var(std::vector<double>(x.col(j).data(), x.col(j).data() + n));
        CHECK(std::abs(mv.mean - want_mean) <= 4.0 * std::sqrt(want_var / n));
        CHECK(std::abs(mv.var - want_var) <= 4.0 * want_var * std::sqrt(2.0 / (n - 1.0)));
    }

    CHECK((forward_sample(target, s, t, 50, 77) - forward_sample(target, s, t, 50, 77)).norm() ==
          0.0);
    CHECK((forward_sample(target, s, t, 50, 77) - forward_sample(target, s, t, 50, 78)).norm() >
          0.0);
    CHECK_THROWS_AS(forward_sample(target, s, 0, 10, 1), std::out_of_range);
    CHECK_THROWS_AS(forward_sample(target, s, 121, 10, 1), std::out_of_range);
}

TEST_CASE("reverse initialization is standard normal with exact density") {
    Schedule s = build_schedule({60, 2.0, 4.0});
    TrajectoryBatch b = init_reverse(s, 3, 100, 5);
    CHECK(b.t == 60);
    CHECK(b.n() == 100);
    CHECK(b.d() == 3);
    CHECK(b.n_flagged() == 0);
    CHECK(b.logdet_accum.cwiseAbs().maxCoeff() == 0.0);
    const double log_2pi = std::log(2.0 * M_PI);
    for (int i = 0; i < b.n(); ++i) {
        double want = -0.5 * (3.0 * log_2pi + b.points.row(i).squaredNorm());
        CHECK(b.log_density(i) == doctest::Approx(want).epsilon(1e-14));
    }
    TrajectoryBatch b2 = init_reverse(s, 3, 100, 5);
    CHECK((b.points - b2.points).norm() == 0.0);
    CHECK_THROWS_AS(init_reverse(s, 0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_reverse(s, 3, 0, 1), std::invalid_argument);
}

TEST_CASE("reverse step rejects invalid states") {
    Schedule s = build_schedule({30, 2.0, 4.0});
    MixtureTarget pm = make_point_mass(2, Vec::Zero(2));
    ExactScoreField field(pm, s);

    TrajectoryBatch b = init_reverse(s, 2, 4, 1);
    b.t = 1;
    CHECK_THROWS_AS(reverse_step(b, field, s, CoeffChoice::star), std::invalid_argument);

    TrajectoryBatch b3 = init_reverse(s, 3, 4, 1);
    CHECK_THROWS_AS(reverse_step(b3, field, s, CoeffChoice::star), std::invalid_argument);
}

TEST_CASE("point-mass reverse flow is the analytic linear contraction") {
    // score -x/(1-ab) makes every step a pure scaling, so the whole pass is
    // y_1 = gamma * y_T with gamma from the same affine recursion the
    // oracle uses with sigma^2 = 0
    Schedule s = build_schedule({80, 2.0, 4.0});
    int d = 3, n = 50;
    MixtureTarget pm = make_point_mass(d, Vec::Zero(d));
    ExactScoreField field(pm, s);

    TrajectoryBatch init = init_reverse(s, d, n, 9);
    TrajectoryBatch out = run_reverse(s, d, field, n, 9, CoeffChoice::star);
    CHECK(out.t == 1);
    CHECK(out.n_flagged() == 0);

    oracles::AffineLaw law = oracles::reverse_affine_recursion(s, 0.0, CoeffChoice::star);
    double gamma = std::sqrt(law.var);
    for (int i = 0; i < n; ++i) {
        CHECK((out.points.row(i) - gamma * init.points.row(i)).norm() <=
              1e-12 * (1.0 + init.points.row(i).norm()));
    }
    // the eta* contraction at the default schedule is strong
    CHECK(gamma < 0.05);
}

TEST_CASE("tracked density is exact for an affine flow") {
    // isotropic gaussian target: the score is linear, every reverse map is
    // affine, so the pushforward of N(0,I) stays gaussian and the tracked
    // log-density must match the closed-form law
    Schedule s = build_schedule({60, 2.0, 4.0});
    int d = 3, n = 200;
    Vec mu = Vec::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    double sigma = 0.5;
    MixtureTarget target = make_gaussian_iso(d, mu, sigma);
    ExactScoreField field(target, s);

    TrajectoryBatch out = run_reverse(s, d, field, n, 21, CoeffChoice::star);
    oracles::AffineLaw law =
        oracles::reverse_affine_recursion(s, sigma * sigma, CoeffChoice::star);

    const double log_2pi = std::log(2.0 * M_PI);
    KahanSum abs_err;
    for (int i = 0; i < n; ++i) {
        Vec y = out.points.row(i).transpose();
        double want =
            -0.5 * (d * (log_2pi + std::log(law.var)) +
                    (y - law.mean_coef * mu).squaredNorm() / law.var);
        abs_err.add(std::abs(out.log_density(i) - want));
    }
    CHECK(abs_err.value() / n <= 1e-9);

    // sample moments agree with the affine law
    for (int j = 0; j < d; ++j) {
        MeanVar mv =
            mean_var(std::vector<double>(out.points.col(j).data(), out.points.col(j).data() + n));
        CHECK(std::abs(mv.mean - law.mean_coef * mu(j)) <= 4.0 * std::sqrt(law.var / n));
        CHECK(std::abs(mv.var - law.var) <= 4.0 * law.var * std::sqrt(2.0 / (n - 1.0)));
    }
}

TEST_CASE("density equals initial gaussian minus accumulated log-determinant") {
    Schedule s = build_schedule({50, 2.0, 4.0});
    int d = 2, n = 40;
    MixtureTarget target = make_gaussian_iso(d, Vec::Zero(d), 1.3);
    ExactScoreField field(target, s);
    TrajectoryBatch init = init_reverse(s, d, n, 4);
    TrajectoryBatch out = run_reverse(s, d, field, n, 4, CoeffChoice::simple);
    for (int i = 0; i < n; ++i) {
        CHECK(out.log_density(i) ==
              doctest::Approx(init.log_density(i) - out.logdet_accum(i)).epsilon(1e-10));
    }
}

TEST_CASE("a singular step flags points and stops their density tracking") {
    Schedule s = build_schedule({40, 2.0, 4.0});
    int d = 2, n = 30, trip = 25;
    SingularAt field;
    field.d_ = d;
    field.trip_t = trip;
    field.trip_eta = coefficient(s, trip, CoeffChoice::star);

    ReverseDiagnostics diag;
    TrajectoryBatch out = run_reverse(s, d, field, n, 3, CoeffChoice::star, &diag);

    CHECK(out.n_flagged() == n);
    CHECK(diag.total_flagged == n);
    CHECK(diag.steps.size() == static_cast<std::size_t>(39));
    // every flag fires at the tripped step, none before or after
    for (const StepDiag &sd : diag.steps) {
        CHECK(sd.n_flagged == (sd.t == trip ? n : 0));
    }
    for (int i = 0; i < n; ++i) {
        CHECK(std::isnan(out.log_density(i)));
        CHECK(std::isfinite(out.points.row(i).norm())); // the point kept moving
    }
}

TEST_CASE("reverse runs are deterministic in the seed") {
    Schedule s = build_schedule({50, 2.0, 4.0});
    MixtureTarget target = make_gaussian_iso(2, Vec::Zero(2), 1.0);
    ExactScoreField field(target, s);
    TrajectoryBatch a = run_reverse(s, 2, field, 25, 6, CoeffChoice::star);
    TrajectoryBatch b = run_reverse(s, 2, field, 25, 6, CoeffChoice::star);
    CHECK((a.points - b.points).norm() == 0.0);
    CHECK((a.log_density - b.log_density).norm() == 0.0);
    TrajectoryBatch c = run_reverse(s, 2, field, 25, 7, CoeffChoice::star);
    CHECK((a.points - c.points).norm() > 0.0);
}

TEST_CASE("step diagnostics cover every step exactly once") {
    Schedule s = build_schedule({25, 2.0, 4.0});
    MixtureTarget target = make_gaussian_iso(2, Vec::Zero(2), 1.0);
    ExactScoreField field(target, s);
    ReverseDiagnostics diag;
    run_reverse(s, 2, field, 10, 1, CoeffChoice::star, &diag);
    REQUIRE(diag.steps.size() == 24);
    for (std::size_t i = 0; i < diag.steps.size(); ++i) {
        CHECK(diag.steps[i].t == 25 - static_cast<int>(i));
        CHECK(diag.steps[i].mean_abs_logdet >= 0.0);
    }
}
