#include "pflab/validation.hpp"

#include "pflab/geometry.hpp"
#include "pflab/rng.hpp"
#include "pflab/sampler.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pflab {

CheckResult check_logdet(const Mat &a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("check_logdet: matrix must be square");
    }
    double norm = spectral_norm(a);
    if (norm > 0.25 + 1e-12) {
        throw std::invalid_argument("check_logdet: precondition-violation, spectral norm > 1/4");
    }
    Mat m = Mat::Identity(a.rows(), a.cols()) + a;
    double log_abs = 0.0, sign = 0.0;
    bool ok = signed_log_abs_det(m, log_abs, sign);
    double rhs = a.trace() - 2.0 * a.squaredNorm();
    CheckResult res;
    res.name = "logdet_lower_bound";
    // ||A|| <= 1/4 keeps I + A well-conditioned, so det > 0; a nonpositive
    // sign would mean the precondition check itself is broken
    double slack = (ok && sign > 0.0) ? log_abs - rhs : -std::numeric_limits<double>::infinity();
    res.measured_slack = slack;
    res.passed = slack >= -1e-12;
    std::ostringstream ctx;
    ctx << "d=" << a.rows() << " norm=" << norm;
    res.context = ctx.str();
    return res;
}

CheckResult check_jacobian_identity(const MixtureTarget &target, const Schedule &schedule, int t,
                                    const Vec &x) {
    if (t < 2 || t > schedule.T()) {
        throw std::out_of_range("check_jacobian_identity: need 2 <= t <= T");
    }
    const int d = target.d;
    const double a = schedule.alpha_at(t);
    const double ab = schedule.alpha_bar_at(t);
    const double f = std::sqrt((1.0 - ab) / (a - ab));
    const double eta = schedule.eta_star_at(t);

    NoisedQuery q{t, x};
    Mat j = score_jacobian(target, schedule, q);
    PosteriorMoments pm = posterior_moments(target, schedule, q);

    Mat lhs = f * (Mat::Identity(d, d) + eta * j) - Mat::Identity(d, d);
    Mat rhs = (f - 1.0) * (ab / (1.0 - ab)) * pm.cov;

    // entrywise (Frobenius) residual; absolute residuals below 1e-12*d are
    // treated as exact so degenerate zero-zero comparisons pass cleanly
    double abs_res = (lhs - rhs).norm();
    double scale = std::max(lhs.norm(), rhs.norm());
    double rel = abs_res <= 1e-12 * d ? 0.0 : abs_res / scale;

    double tr_res = std::abs(lhs.trace() - rhs.trace());
    double tr_scale = std::max(std::abs(lhs.trace()), std::abs(rhs.trace()));
    double tr_rel = tr_res <= 1e-12 * d ? 0.0 : tr_res / tr_scale;

    CheckResult res;
    res.name = "jacobian_identity";
    double worst = std::max(rel, tr_rel);
    res.measured_slack = 1e-8 - worst;
    res.passed = worst <= 1e-8;
    std::ostringstream ctx;
    ctx << "d=" << d << " t=" << t << " T=" << schedule.T()
        << " comps=" << target.n_components() << " rel=" << rel << " tr_rel=" << tr_rel;
    res.context = ctx.str();
    return res;
}

TraceDiag posterior_trace_diagnostic(const MixtureTarget &target, const Schedule &schedule, int n,
                                     std::uint64_t seed) {
    if (target.nominal_k < 0) {
        throw std::invalid_argument(
            "posterior_trace_diagnostic: target has no recorded intrinsic dimension");
    }
    if (n < 1) {
        throw std::invalid_argument("posterior_trace_diagnostic: n must be >= 1");
    }
    const int T = schedule.T();
    KahanSum total, total_var;
    for (int t = 2; t <= T; ++t) {
        const double a = schedule.alpha_at(t);
        const double ab = schedule.alpha_bar_at(t);
        const double coef = (std::sqrt((1.0 - ab) / (a - ab)) - 1.0) * (ab / (1.0 - ab));
        Mat xs = forward_sample(target, schedule, t, n,
                                mix64(seed ^ static_cast<std::uint64_t>(t) ^ 0x74726163ULL));
        std::vector<double> vals(n);
        for (int i = 0; i < n; ++i) {
            NoisedQuery q{t, xs.row(i).transpose()};
            PosteriorMoments pm = posterior_moments(target, schedule, q);
            vals[i] = coef * coef * pm.cov.squaredNorm();
        }
        MeanVar mv = mean_var(vals);
        total.add(mv.mean);
        total_var.add(mv.var / n);
    }
    TraceDiag diag;
    diag.value = total.value();
    diag.stderr_ = std::sqrt(total_var.value());
    double lt = std::log(static_cast<double>(T));
    diag.reference = target.nominal_k * lt * lt / T;
    return diag;
}

double default_fd_step(const Vec &x) {
    return 1e-5 * (1.0 + x.cwiseAbs().maxCoeff());
}

Mat finite_diff_jacobian(const std::function<Vec(const Vec &)> &field_eval, const Vec &x,
                         double h) {
    if (h <= 0.0) {
        throw std::invalid_argument("finite_diff_jacobian: h must be positive");
    }
    const int d = static_cast<int>(x.size());
    Mat j(d, d);
    for (int c = 0; c < d; ++c) {
        Vec xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        j.col(c) = (field_eval(xp) - field_eval(xm)) / (2.0 * h);
    }
    return j;
}

Mat finite_diff_jacobian(const ScoreField &field, int t, const Vec &x, double h) {
    return finite_diff_jacobian([&](const Vec &y) { return field.eval(t, y); }, x, h);
}

// ---- randomized suites ---------------------------------------------------

namespace {

MixtureTarget random_target(int d, int max_components, Rng &rng) {
    int m = 1 + static_cast<int>(rng.uniform_int(max_components));
    std::vector<MixtureComponent> comps(m);
    double wsum = 0.0;
    for (auto &c : comps) {
        c.weight = 0.1 + rng.uniform();
        wsum += c.weight;
    }
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        // normalize so the weights sum to exactly 1 in floating point
        comps[i].weight = (i + 1 == m) ? 1.0 - acc : comps[i].weight / wsum;
        acc += comps[i].weight;
    }
    for (auto &c : comps) {
        c.mean = 2.0 * rng.normal_vec(d) / std::sqrt(static_cast<double>(d));
        int r = static_cast<int>(rng.uniform_int(d + 1)); // 0 = point mass
        c.cov_factor.resize(d, r);
        for (int j = 0; j < r; ++j) {
            for (int i = 0; i < d; ++i) {
                c.cov_factor(i, j) = 0.6 * rng.normal();
            }
        }
    }
    return make_gmm(d, comps);
}

struct SuiteBuilder {
    SuiteResult res;
    explicit SuiteBuilder(const std::string &name) {
        res.check = name;
        res.max_slack = std::numeric_limits<double>::infinity();
    }
    void record(bool passed, double slack) {
        ++res.trials;
        res.failures += passed ? 0 : 1;
        res.max_slack = std::min(res.max_slack, slack);
    }
};

} // namespace

std::vector<SuiteResult> run_validation_suite(std::uint64_t seed) {
    std::vector<SuiteResult> out;

    // schedule bounds over the default grid
    {
        SuiteBuilder b("schedule_admissibility");
        for (int T : {50, 100, 200, 400, 800}) {
            Schedule s = build_schedule({T, 2.0, 4.0});
            for (const auto &chk : validate_schedule(s)) {
                if (chk.name == "alpha_bar_T" || chk.name == "alpha_bar_T_exponent") {
                    continue;
                }
                b.record(chk.passed, chk.slack);
            }
        }
        out.push_back(b.res);
    }

    // normalized-step-factor sign: sqrt((1-ab)/(a-ab)) >= 1 for t >= 2
    {
        SuiteBuilder b("step_factor_nonnegative");
        for (int T : {50, 100, 200, 400, 800}) {
            Schedule s = build_schedule({T, 2.0, 4.0});
            double slack = std::numeric_limits<double>::infinity();
            for (int t = 2; t <= T; ++t) {
                double f =
                    std::sqrt((1.0 - s.alpha_bar_at(t)) / (s.alpha_at(t) - s.alpha_bar_at(t)));
                slack = std::min(slack, f - 1.0);
            }
            b.record(slack >= 0.0, slack);
        }
        out.push_back(b.res);
    }

    // log-det lower bound on random matrices rescaled into the norm ball
    {
        SuiteBuilder b("logdet_lower_bound");
        Rng rng = substream(seed, 1);
        for (int trial = 0; trial < 10000; ++trial) {
            int d = 2 + static_cast<int>(rng.uniform_int(15));
            Mat a(d, d);
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    a(i, j) = rng.normal();
                }
            }
            a *= (0.25 * rng.uniform_pos()) / spectral_norm(a);
            CheckResult res = check_logdet(a);
            b.record(res.passed, res.measured_slack);
        }
        out.push_back(b.res);
    }

    // Jacobian identity on random (target, t, x) triples
    {
        SuiteBuilder b("jacobian_identity");
        Rng rng = substream(seed, 2);
        std::vector<Schedule> schedules;
        for (int T : {50, 100, 400}) {
            schedules.push_back(build_schedule({T, 2.0, 4.0}));
        }
        for (int trial = 0; trial < 1000; ++trial) {
            const Schedule &s = schedules[trial % schedules.size()];
            int d = 2 << rng.uniform_int(3); // 2, 4, 8
            MixtureTarget target = random_target(d, 3, rng);
            int t = 2 + static_cast<int>(rng.uniform_int(s.T() - 1));
            Mat x = forward_sample(target, s, t, 1, rng.next_u64());
            CheckResult res = check_jacobian_identity(target, s, t, x.row(0).transpose());
            b.record(res.passed, res.measured_slack);
        }
        out.push_back(b.res);
    }

    // direct mixture score == posterior-mean (denoising) form
    {
        SuiteBuilder b("score_consistency");
        Rng rng = substream(seed, 3);
        Schedule s = build_schedule({100, 2.0, 4.0});
        for (int trial = 0; trial < 200; ++trial) {
            int d = 2 + static_cast<int>(rng.uniform_int(7));
            MixtureTarget target = random_target(d, 3, rng);
            int t = 1 + static_cast<int>(rng.uniform_int(s.T()));
            Mat x = forward_sample(target, s, t, 1, rng.next_u64());
            NoisedQuery q{t, x.row(0).transpose()};
            Vec s_direct = score(target, s, q);
            PosteriorMoments pm = posterior_moments(target, s, q);
            double ab = s.alpha_bar_at(t);
            Vec s_tweedie = -(q.x - std::sqrt(ab) * pm.mean) / (1.0 - ab);
            double tol = 1e-10 * (1.0 + s_direct.norm());
            double err = (s_direct - s_tweedie).norm();
            b.record(err <= tol, tol - err);
        }
        out.push_back(b.res);
    }

    // score Jacobian is a Hessian, hence symmetric
    {
        SuiteBuilder b("jacobian_symmetry");
        Rng rng = substream(seed, 4);
        Schedule s = build_schedule({100, 2.0, 4.0});
        for (int trial = 0; trial < 200; ++trial) {
            int d = 2 + static_cast<int>(rng.uniform_int(7));
            MixtureTarget target = random_target(d, 3, rng);
            int t = 1 + static_cast<int>(rng.uniform_int(s.T()));
            Mat x = forward_sample(target, s, t, 1, rng.next_u64());
            Mat j = score_jacobian(target, s, {t, x.row(0).transpose()});
            double tol = 1e-10 * (1.0 + j.norm());
            double err = (j - j.transpose()).norm();
            b.record(err <= tol, tol - err);
        }
        out.push_back(b.res);
    }

    // every perturbed field's Jacobian matches finite differences
    {
        SuiteBuilder b("perturbation_fd_consistency");
        Rng rng = substream(seed, 5);
        Schedule s = build_schedule({50, 2.0, 4.0});
        for (PerturbKind kind : {PerturbKind::constant_bias, PerturbKind::tangential,
                                 PerturbKind::gain, PerturbKind::smooth_field}) {
            for (int trial = 0; trial < 25; ++trial) {
                int d = 2 + static_cast<int>(rng.uniform_int(5));
                MixtureTarget target = random_target(d, 2, rng);
                auto exact = std::make_shared<ExactScoreField>(target, s);
                auto pert = perturb(exact, {kind, 0.05, rng.next_u64()});
                int t = 1 + static_cast<int>(rng.uniform_int(s.T()));
                Mat x = forward_sample(target, s, t, 1, rng.next_u64());
                Vec xv = x.row(0).transpose();
                Mat ja = pert->jacobian(t, xv);
                Mat jf = finite_diff_jacobian(*pert, t, xv, default_fd_step(xv));
                double rel = (ja - jf).norm() / std::max(1.0, ja.norm());
                b.record(rel <= 1e-5, 1e-5 - rel);
            }
        }
        out.push_back(b.res);
    }

    // greedy net: exact coverage and separation
    {
        SuiteBuilder b("greedy_net_validity");
        Rng rng = substream(seed, 6);
        for (int trial = 0; trial < 5; ++trial) {
            int d = 2 + static_cast<int>(rng.uniform_int(7));
            int n = 200 + static_cast<int>(rng.uniform_int(200));
            Mat cloud(n, d);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < d; ++j) {
                    cloud(i, j) = rng.normal();
                }
            }
            double eps = 0.5 + rng.uniform();
            std::vector<int> net = greedy_net(cloud, eps);
            double cover_slack = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (int c : net) {
                    best = std::min(best, (cloud.row(i) - cloud.row(c)).norm());
                }
                cover_slack = std::min(cover_slack, eps - best);
            }
            double sep_slack = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < net.size(); ++i) {
                for (std::size_t j = i + 1; j < net.size(); ++j) {
                    sep_slack = std::min(
                        sep_slack, (cloud.row(net[i]) - cloud.row(net[j])).norm() - eps);
                }
            }
            double slack = std::min(cover_slack, sep_slack);
            b.record(slack >= 0.0, slack);
        }
        out.push_back(b.res);
    }

    return out;
}

} // namespace pflab
