#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pflab/rng.hpp"
#include "pflab/sampler.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"
#include "pflab/validation.hpp"

#include <cmath>
#include <memory>

using namespace pflab;

namespace {

const Schedule &sched() {
    static Schedule s = build_schedule({80, 2.0, 4.0});
    return s;
}

MixtureTarget two_comp(int d) {
    Mat low(d, 1);
    for (int i = 0; i < d; ++i) low(i, 0) = 0.4 + 0.1 * i;
    MixtureComponent a{0.45, Vec::Constant(d, -0.6), 0.7 * Mat::Identity(d, d)};
    MixtureComponent b{0.55, Vec::Constant(d, 0.8), low};
    return make_gmm(d, {a, b});
}

} // namespace

TEST_CASE("exact field reproduces the direct mixture formulas") {
    MixtureTarget t = two_comp(3);
    ExactScoreField field(t, sched());
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        int step = 1 + static_cast<int>(rng.uniform_int(80));
        Vec x = 2.0 * rng.normal_vec(3);
        NoisedQuery q{step, x};
        CHECK((field.eval(step, x) - score(t, sched(), q)).norm() <= 1e-12);
        CHECK((field.jacobian(step, x) - score_jacobian(t, sched(), q)).norm() <= 1e-12);
        CHECK(field.log_marginal(step, x) ==
              doctest::Approx(log_marginal(t, sched(), q)).epsilon(1e-12));
    }
}

TEST_CASE("constant jacobian only for single-component targets") {
    MixtureTarget single = make_gaussian_iso(4, Vec::Zero(4), 0.9);
    ExactScoreField f1(single, sched());
    auto cj = f1.constant_jacobian(10);
    REQUIRE(cj.has_value());
    CHECK((*cj - f1.jacobian(10, Vec::Constant(4, 1.3))).norm() <= 1e-14);

    ExactScoreField f2(two_comp(3), sched());
    CHECK_FALSE(f2.constant_jacobian(10).has_value());
}

TEST_CASE("zero perturbation is exact passthrough") {
    auto base = std::make_shared<ExactScoreField>(two_comp(2), sched());
    for (PerturbKind kind :
         {PerturbKind::none, PerturbKind::tangential, PerturbKind::gain}) {
        auto p = perturb(base, {kind, 0.0, 123});
        Vec x = Vec::Constant(2, 0.4);
        CHECK((p->eval(20, x) - base->eval(20, x)).norm() == 0.0);
        CHECK((p->jacobian(20, x) - base->jacobian(20, x)).norm() == 0.0);
    }
    CHECK_THROWS_AS(perturb(base, {PerturbKind::gain, -0.1, 0}), std::invalid_argument);
}

TEST_CASE("gain perturbation scales field and jacobian") {
    // on a point mass at 0 the perturbed score is -(1+delta) x / (1-ab)
    MixtureTarget t = make_point_mass(3, Vec::Zero(3));
    auto base = std::make_shared<ExactScoreField>(t, sched());
    auto p = perturb(base, {PerturbKind::gain, 0.1, 0});
    int step = 30;
    double ab = sched().alpha_bar_at(step);
    Vec x = Vec::Constant(3, 0.5);
    CHECK((p->eval(step, x) + 1.1 * x / (1.0 - ab)).norm() <= 1e-12 / (1.0 - ab));
    CHECK((p->jacobian(step, x) + 1.1 * Mat::Identity(3, 3) / (1.0 - ab)).norm() <=
          1e-12 / (1.0 - ab));
    // gain keeps the jacobian point-independent
    auto cj = p->constant_jacobian(step);
    REQUIRE(cj.has_value());
}

TEST_CASE("constant bias shifts by a fixed unit vector") {
    auto base = std::make_shared<ExactScoreField>(two_comp(4), sched());
    auto p = perturb(base, {PerturbKind::constant_bias, 0.05, 7});
    Vec x1 = Vec::Constant(4, 0.2), x2 = Vec::Constant(4, -1.0);
    Vec d1 = p->eval(12, x1) - base->eval(12, x1);
    Vec d2 = p->eval(40, x2) - base->eval(40, x2);
    CHECK(d1.norm() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK((d1 - d2).norm() <= 1e-15); // same direction everywhere
    CHECK((p->jacobian(12, x1) - base->jacobian(12, x1)).norm() == 0.0);
}

TEST_CASE("tangential perturbation is unit-size and orthogonal to the score") {
    auto base = std::make_shared<ExactScoreField>(two_comp(4), sched());
    auto p = perturb(base, {PerturbKind::tangential, 0.08, 3});
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        int step = 1 + static_cast<int>(rng.uniform_int(80));
        Vec x = rng.normal_vec(4);
        Vec s = base->eval(step, x);
        Vec ds = p->eval(step, x) - s;
        CHECK(ds.norm() == doctest::Approx(0.08).epsilon(1e-10));
        CHECK(std::abs(ds.dot(s)) <= 1e-10 * (1.0 + s.norm()));
    }
}

TEST_CASE("perturbation jacobians match finite differences") {
    auto base = std::make_shared<ExactScoreField>(two_comp(3), sched());
    Rng rng(17);
    for (PerturbKind kind : {PerturbKind::tangential, PerturbKind::smooth_field}) {
        auto p = perturb(base, {kind, 0.07, 29});
        for (int trial = 0; trial < 5; ++trial) {
            int step = 1 + static_cast<int>(rng.uniform_int(80));
            Vec x = rng.normal_vec(3);
            Mat ja = p->jacobian(step, x);
            Mat jf = finite_diff_jacobian(*p, step, x, default_fd_step(x));
            CHECK((ja - jf).norm() <= 1e-5 * std::max(1.0, ja.norm()));
        }
    }
}

TEST_CASE("pointwise error functionals against hand formulas") {
    const Schedule &s = sched();
    MixtureTarget t = make_gaussian_iso(3, Vec::Zero(3), 1.0);
    auto base = std::make_shared<ExactScoreField>(t, s);
    int step = 25;
    Vec x = Vec::Constant(3, 0.9);

    SUBCASE("identical fields give zero") {
        CHECK(pointwise_score_error(*base, *base, step, x) == 0.0);
        CHECK(pointwise_jacobi_error(*base, *base, step, x) == 0.0);
    }

    SUBCASE("parallel difference keeps the inner-product term") {
        // difference = delta * s / ||s||: eps^2 = delta^2 + delta^2 ||s||^2
        double delta = 0.03;
        Vec sv = base->eval(step, x);
        struct Shifted : ScoreField {
            std::shared_ptr<const ScoreField> b;
            double d;
            int dim() const override { return b->dim(); }
            Vec eval(int t2, const Vec &y) const override {
                Vec s0 = b->eval(t2, y);
                return s0 + d * s0 / s0.norm();
            }
            Mat jacobian(int t2, const Vec &y) const override { return b->jacobian(t2, y); }
            std::string descriptor() const override { return "shifted"; }
        } shifted;
        shifted.b = base;
        shifted.d = delta;
        double expect = std::sqrt(delta * delta + delta * delta * sv.squaredNorm());
        CHECK(pointwise_score_error(*base, shifted, step, x) ==
              doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("gain difference on the jacobian") {
        // dJ = -delta I/(1-ab): eps^2 = delta^2 d^2/(1-ab)^2 + delta^2 d/(1-ab)^2
        double delta = 0.1;
        MixtureTarget pm = make_point_mass(3, Vec::Zero(3));
        auto pm_base = std::make_shared<ExactScoreField>(pm, s);
        auto gained = perturb(pm_base, {PerturbKind::gain, delta, 0});
        double ab = s.alpha_bar_at(step);
        double u = 1.0 - ab;
        double expect = std::sqrt(delta * delta * 9.0 / (u * u) + delta * delta * 3.0 / (u * u));
        CHECK(pointwise_jacobi_error(*pm_base, *gained, step, x) ==
              doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("average errors: constants, gaussian moments, linear scaling") {
    const Schedule &s = sched();

    SUBCASE("exact vs exact is identically zero") {
        MixtureTarget t = two_comp(2);
        auto base = std::make_shared<ExactScoreField>(t, s);
        AverageErrors e = average_errors(*base, *base, t, s, 16, 5);
        CHECK(e.eps_score == 0.0);
        CHECK(e.eps_jacobi == 0.0);
    }

    SUBCASE("tangential has constant pointwise value delta") {
        MixtureTarget t = two_comp(2);
        auto base = std::make_shared<ExactScoreField>(t, s);
        auto p = perturb(base, {PerturbKind::tangential, 0.04, 9});
        AverageErrors e = average_errors(*base, *p, t, s, 24, 5);
        CHECK(e.eps_score == doctest::Approx(0.04).epsilon(1e-10));
        CHECK(e.eps_score_stderr <= 1e-12);
    }

    SUBCASE("gain on N(0, I): moment oracle E||X||^2 + E||X||^4") {
        // the time-t marginal of N(0, I) is N(0, I) for every t, so
        // eps^2 = delta^2 (d + d^2 + 2d) exactly
        int d = 5;
        MixtureTarget t = make_gaussian_iso(d, Vec::Zero(d), 1.0);
        auto base = std::make_shared<ExactScoreField>(t, s);
        double delta = 0.2;
        auto p = perturb(base, {PerturbKind::gain, delta, 0});
        AverageErrors e = average_errors(*base, *p, t, s, 400, 31);
        double expect = delta * std::sqrt(static_cast<double>(d + d * d + 2 * d));
        CHECK(std::abs(e.eps_score - expect) <= 3.0 * e.eps_score_stderr);
        CHECK(e.eps_score_stderr > 0.0);
    }

    SUBCASE("bias and tangential errors are exactly linear in delta") {
        MixtureTarget t = two_comp(3);
        auto base = std::make_shared<ExactScoreField>(t, s);
        for (PerturbKind kind : {PerturbKind::constant_bias, PerturbKind::tangential}) {
            Vec x = Vec::Constant(3, 0.6);
            auto p1 = perturb(base, {kind, 0.02, 4});
            auto p2 = perturb(base, {kind, 0.04, 4});
            double e1 = pointwise_score_error(*base, *p1, 14, x);
            double e2 = pointwise_score_error(*base, *p2, 14, x);
            CHECK(e2 / e1 == doctest::Approx(2.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("descriptors record provenance") {
    auto base = std::make_shared<ExactScoreField>(two_comp(2), sched());
    CHECK(base->descriptor() == "exact");
    auto p = perturb(base, {PerturbKind::gain, 0.1, 0});
    CHECK(p->descriptor().find("gain") != std::string::npos);
    CHECK(p->descriptor().find("exact") != std::string::npos);
}

TEST_CASE("perturbation kind names round-trip") {
    for (PerturbKind k : {PerturbKind::none, PerturbKind::constant_bias, PerturbKind::tangential,
                          PerturbKind::gain, PerturbKind::smooth_field}) {
        CHECK(perturb_kind_from_name(perturb_kind_name(k)) == k);
    }
    CHECK_THROWS_AS(perturb_kind_from_name("wobble"), std::invalid_argument);
}
