#include "pflab/score_models.hpp"

#include "pflab/rng.hpp"
#include "pflab/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace pflab {

namespace {
constexpr double k_log_2pi = 1.8378770664093454836;
}

// ---- exact field -------------------------------------------------------

ExactScoreField::ExactScoreField(const MixtureTarget &target, const Schedule &schedule)
    : m_target(target), m_schedule(schedule) {
    validate_target(target);
    const int d = target.d;
    m_steps.resize(schedule.T());
    for (int t = 1; t <= schedule.T(); ++t) {
        const double ab = schedule.alpha_bar_at(t);
        auto &comps = m_steps[t - 1];
        comps.resize(target.components.size());
        for (std::size_t i = 0; i < target.components.size(); ++i) {
            const MixtureComponent &c = target.components[i];
            CachedComponent &cc = comps[i];
            cc.m = std::sqrt(ab) * c.mean;
            Mat cov = Mat::Identity(d, d) * (1.0 - ab);
            if (c.rank() > 0) {
                cov.noalias() += ab * c.cov_factor * c.cov_factor.transpose();
            }
            Eigen::LLT<Mat> llt(cov);
            cc.chol_l = llt.matrixL();
            cc.c_inv = llt.solve(Mat::Identity(d, d));
            double log_det = 2.0 * cc.chol_l.diagonal().array().log().sum();
            cc.log_norm = std::log(c.weight) - 0.5 * (d * k_log_2pi + log_det);
        }
    }
}

const std::vector<ExactScoreField::CachedComponent> &ExactScoreField::step(int t) const {
    if (t < 1 || t > m_schedule.T()) {
        throw std::out_of_range("score field: step index out of range");
    }
    return m_steps[t - 1];
}

double ExactScoreField::log_marginal(int t, const Vec &x) const {
    const auto &comps = step(t);
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> ll(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) {
        Vec white = comps[i].chol_l.triangularView<Eigen::Lower>().solve(x - comps[i].m);
        ll[i] = comps[i].log_norm - 0.5 * white.squaredNorm();
        mx = std::max(mx, ll[i]);
    }
    double z = 0.0;
    for (double v : ll) {
        z += std::exp(v - mx);
    }
    return mx + std::log(z);
}

Vec ExactScoreField::eval(int t, const Vec &x) const {
    const auto &comps = step(t);
    if (comps.size() == 1) {
        return -(comps[0].c_inv * (x - comps[0].m));
    }
    std::vector<double> ll(comps.size());
    std::vector<Vec> g(comps.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        Vec r = x - comps[i].m;
        Vec white = comps[i].chol_l.triangularView<Eigen::Lower>().solve(r);
        ll[i] = comps[i].log_norm - 0.5 * white.squaredNorm();
        g[i] = -(comps[i].c_inv * r);
        mx = std::max(mx, ll[i]);
    }
    double z = 0.0;
    for (double v : ll) {
        z += std::exp(v - mx);
    }
    Vec s = Vec::Zero(dim());
    for (std::size_t i = 0; i < comps.size(); ++i) {
        s.noalias() += (std::exp(ll[i] - mx) / z) * g[i];
    }
    return s;
}

Mat ExactScoreField::jacobian(int t, const Vec &x) const {
    const auto &comps = step(t);
    if (comps.size() == 1) {
        return -comps[0].c_inv;
    }
    std::vector<double> ll(comps.size());
    std::vector<Vec> g(comps.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        Vec r = x - comps[i].m;
        Vec white = comps[i].chol_l.triangularView<Eigen::Lower>().solve(r);
        ll[i] = comps[i].log_norm - 0.5 * white.squaredNorm();
        g[i] = -(comps[i].c_inv * r);
        mx = std::max(mx, ll[i]);
    }
    double z = 0.0;
    for (double v : ll) {
        z += std::exp(v - mx);
    }
    const int d = dim();
    Vec s = Vec::Zero(d);
    Mat j = Mat::Zero(d, d);
    for (std::size_t i = 0; i < comps.size(); ++i) {
        double ri = std::exp(ll[i] - mx) / z;
        s.noalias() += ri * g[i];
        j.noalias() += ri * (g[i] * g[i].transpose());
        j.noalias() -= ri * comps[i].c_inv;
    }
    j.noalias() -= s * s.transpose();
    return j;
}

std::optional<Mat> ExactScoreField::constant_jacobian(int t) const {
    const auto &comps = step(t);
    if (comps.size() != 1) {
        return std::nullopt;
    }
    return -comps[0].c_inv;
}

// ---- perturbations -----------------------------------------------------

const char *perturb_kind_name(PerturbKind k) {
    switch (k) {
    case PerturbKind::none: return "none";
    case PerturbKind::constant_bias: return "constant_bias";
    case PerturbKind::tangential: return "tangential";
    case PerturbKind::gain: return "gain";
    case PerturbKind::smooth_field: return "smooth_field";
    }
    return "?";
}

PerturbKind perturb_kind_from_name(const std::string &name) {
    for (PerturbKind k : {PerturbKind::none, PerturbKind::constant_bias, PerturbKind::tangential,
                          PerturbKind::gain, PerturbKind::smooth_field}) {
        if (name == perturb_kind_name(k)) {
            return k;
        }
    }
    throw std::invalid_argument("unknown perturbation kind: " + name);
}

namespace {

class PerturbedField : public ScoreField {
public:
    PerturbedField(std::shared_ptr<const ScoreField> base, const PerturbationSpec &spec)
        : m_base(std::move(base)), m_spec(spec) {
        const int d = m_base->dim();
        Rng rng = substream(spec.seed, 0x70657274ULL); // "pert"
        switch (spec.kind) {
        case PerturbKind::none:
        case PerturbKind::gain:
            break;
        case PerturbKind::constant_bias:
        case PerturbKind::tangential:
            m_w = rng.normal_vec(d);
            m_w /= m_w.norm();
            break;
        case PerturbKind::smooth_field: {
            // u(x) = sum_j c_j sin(w_j.x + psi_j); low frequency ||w_j|| = 1/2,
            // amplitudes scaled so E||u||^2 = sum ||c_j||^2 / 2 = 1
            const int n_modes = 3;
            m_modes.resize(n_modes);
            for (auto &md : m_modes) {
                md.c = rng.normal_vec(d);
                md.c *= std::sqrt(2.0 / n_modes) / md.c.norm();
                md.w = rng.normal_vec(d);
                md.w *= 0.5 / md.w.norm();
                md.psi = 2.0 * M_PI * rng.uniform();
            }
            break;
        }
        }
    }

    int dim() const override { return m_base->dim(); }

    Vec eval(int t, const Vec &x) const override {
        Vec s = m_base->eval(t, x);
        if (m_spec.delta == 0.0 || m_spec.kind == PerturbKind::none) {
            return s;
        }
        switch (m_spec.kind) {
        case PerturbKind::gain:
            return (1.0 + m_spec.delta) * s;
        case PerturbKind::constant_bias:
            return s + m_spec.delta * m_w;
        case PerturbKind::tangential:
            return s + m_spec.delta * tangential_dir(s);
        case PerturbKind::smooth_field: {
            Vec u = Vec::Zero(dim());
            for (const auto &md : m_modes) {
                u.noalias() += md.c * std::sin(md.w.dot(x) + md.psi);
            }
            return s + m_spec.delta * u;
        }
        default:
            return s;
        }
    }

    Mat jacobian(int t, const Vec &x) const override {
        Mat j = m_base->jacobian(t, x);
        if (m_spec.delta == 0.0 || m_spec.kind == PerturbKind::none ||
            m_spec.kind == PerturbKind::constant_bias) {
            return j;
        }
        switch (m_spec.kind) {
        case PerturbKind::gain:
            return (1.0 + m_spec.delta) * j;
        case PerturbKind::tangential: {
            Vec s = m_base->eval(t, x);
            return j + m_spec.delta * tangential_jacobian(s, j);
        }
        case PerturbKind::smooth_field: {
            for (const auto &md : m_modes) {
                j.noalias() +=
                    (m_spec.delta * std::cos(md.w.dot(x) + md.psi)) * (md.c * md.w.transpose());
            }
            return j;
        }
        default:
            return j;
        }
    }

    std::optional<Mat> constant_jacobian(int t) const override {
        if (m_spec.delta == 0.0 || m_spec.kind == PerturbKind::none ||
            m_spec.kind == PerturbKind::constant_bias) {
            return m_base->constant_jacobian(t);
        }
        if (m_spec.kind == PerturbKind::gain) {
            auto j = m_base->constant_jacobian(t);
            if (j) {
                return Mat((1.0 + m_spec.delta) * (*j));
            }
        }
        return std::nullopt;
    }

    std::string descriptor() const override {
        return std::string("perturbed(") + perturb_kind_name(m_spec.kind) +
               ", delta=" + std::to_string(m_spec.delta) + ") of " + m_base->descriptor();
    }

private:
    struct Mode {
        Vec c;
        Vec w;
        double psi = 0.0;
    };

    // v(s) = (w - (w.shat) shat)/m, shat = s/|s|, m = |w - (w.shat) shat|:
    // the seeded direction orthogonalized against the local score.
    Vec tangential_dir(const Vec &s) const {
        double n = std::max(s.norm(), 1e-12);
        Vec shat = s / n;
        double ws = m_w.dot(shat);
        Vec u = m_w - ws * shat;
        double m = std::max(u.norm(), 1e-12);
        return u / m;
    }

    // dv/dx = (I - v v^T) B (I - shat shat^T) J / (n m), B = -(shat w^T + (w.shat) I);
    // chain rule through shat(x) = s/|s| and the normalization of u.
    Mat tangential_jacobian(const Vec &s, const Mat &j) const {
        const int d = dim();
        double n = std::max(s.norm(), 1e-12);
        Vec shat = s / n;
        double ws = m_w.dot(shat);
        Vec u = m_w - ws * shat;
        double m = std::max(u.norm(), 1e-12);
        Vec v = u / m;

        Mat dshat = (j - shat * (shat.transpose() * j)) / n; // (I - shat shat^T) J / n
        Mat du = -(shat * (m_w.transpose() * dshat) + ws * dshat);
        Mat dv = (du - v * (v.transpose() * du)) / m;
        (void)d;
        return dv;
    }

    std::shared_ptr<const ScoreField> m_base;
    PerturbationSpec m_spec;
    Vec m_w;
    std::vector<Mode> m_modes;
};

} // namespace

std::shared_ptr<const ScoreField> perturb(std::shared_ptr<const ScoreField> base,
                                          const PerturbationSpec &spec) {
    if (spec.delta < 0.0) {
        throw std::invalid_argument("perturb: delta must be nonnegative");
    }
    return std::make_shared<PerturbedField>(std::move(base), spec);
}

// ---- error functionals ---------------------------------------------------

double pointwise_score_error(const ScoreField &exact, const ScoreField &approx, int t,
                             const Vec &x) {
    Vec se = exact.eval(t, x);
    Vec ds = approx.eval(t, x) - se;
    double ip = ds.dot(se);
    return std::sqrt(ds.squaredNorm() + ip * ip);
}

double pointwise_jacobi_error(const ScoreField &exact, const ScoreField &approx, int t,
                              const Vec &x) {
    Mat dj = approx.jacobian(t, x) - exact.jacobian(t, x);
    double tr = dj.trace();
    return std::sqrt(tr * tr + dj.squaredNorm());
}

AverageErrors average_errors(const ScoreField &exact, const ScoreField &approx,
                             const MixtureTarget &target, const Schedule &schedule, int n,
                             std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("average_errors: n must be >= 1");
    }
    const int T = schedule.T();
    // mean of per-(t, sample) squared errors; variance propagated assuming
    // independent draws across t (fresh substream per step)
    KahanSum mean_s, mean_j, var_s, var_j;
    for (int t = 1; t <= T; ++t) {
        Mat xs = forward_sample(target, schedule, t, n, mix64(seed ^ static_cast<std::uint64_t>(t)));
        std::vector<double> e2s(n), e2j(n);
        for (int i = 0; i < n; ++i) {
            Vec x = xs.row(i).transpose();
            double es = pointwise_score_error(exact, approx, t, x);
            double ej = pointwise_jacobi_error(exact, approx, t, x);
            e2s[i] = es * es;
            e2j[i] = ej * ej;
        }
        MeanVar ms = mean_var(e2s);
        MeanVar mj = mean_var(e2j);
        mean_s.add(ms.mean);
        mean_j.add(mj.mean);
        var_s.add(ms.var / n);
        var_j.add(mj.var / n);
    }
    double ms2 = mean_s.value() / T;
    double mj2 = mean_j.value() / T;
    double se_s2 = std::sqrt(var_s.value()) / T;
    double se_j2 = std::sqrt(var_j.value()) / T;

    AverageErrors out;
    out.eps_score = std::sqrt(ms2);
    out.eps_jacobi = std::sqrt(mj2);
    // delta method: se(sqrt(m)) = se(m) / (2 sqrt(m)); zero-error fields
    // report zero spread rather than a 0/0
    out.eps_score_stderr = out.eps_score > 0.0 ? se_s2 / (2.0 * out.eps_score) : 0.0;
    out.eps_jacobi_stderr = out.eps_jacobi > 0.0 ? se_j2 / (2.0 * out.eps_jacobi) : 0.0;
    return out;
}

} // namespace pflab
