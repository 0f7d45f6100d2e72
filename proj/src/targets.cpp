#include "pflab/targets.hpp"

#include "pflab/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pflab {

namespace {

constexpr double k_log_2pi = 1.8378770664093454836;

// Per-component time-t quantities shared by the mixture operations.
struct NoisedComponent {
    Vec m;                    // sqrt(ab) * mu
    Eigen::LLT<Mat> llt;      // chol(ab*Sigma + (1-ab) I)
    double log_det = 0.0;     // log det C
    double log_lik = 0.0;     // log w + log N(x; m, C)
    Vec g;                    // -C^{-1} (x - m)
};

std::vector<NoisedComponent> noised_components(const MixtureTarget &target,
                                               const Schedule &schedule, const NoisedQuery &q) {
    if (q.t < 1 || q.t > schedule.T()) {
        throw std::out_of_range("noised query: step index out of range");
    }
    const double ab = schedule.alpha_bar_at(q.t);
    const int d = target.d;
    std::vector<NoisedComponent> out(target.components.size());
    for (std::size_t i = 0; i < target.components.size(); ++i) {
        const MixtureComponent &c = target.components[i];
        NoisedComponent &nc = out[i];
        nc.m = std::sqrt(ab) * c.mean;
        Mat cov = Mat::Identity(d, d) * (1.0 - ab);
        if (c.rank() > 0) {
            cov.noalias() += ab * c.cov_factor * c.cov_factor.transpose();
        }
        nc.llt.compute(cov);
        nc.log_det = 2.0 * Mat(nc.llt.matrixL()).diagonal().array().log().sum();
        Vec r = q.x - nc.m;
        Vec white = nc.llt.matrixL().solve(r);
        nc.log_lik = std::log(c.weight) - 0.5 * (d * k_log_2pi + nc.log_det + white.squaredNorm());
        nc.g = -nc.llt.solve(r);
    }
    return out;
}

// responsibilities r_i = softmax(log_lik); returns the log normalizer
double responsibilities(const std::vector<NoisedComponent> &ncs, std::vector<double> &r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto &nc : ncs) {
        mx = std::max(mx, nc.log_lik);
    }
    double z = 0.0;
    r.resize(ncs.size());
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        r[i] = std::exp(ncs[i].log_lik - mx);
        z += r[i];
    }
    for (double &ri : r) {
        ri /= z;
    }
    return mx + std::log(z);
}

} // namespace

void validate_target(const MixtureTarget &target) {
    if (target.d < 1) {
        throw std::invalid_argument("target: dimension must be >= 1");
    }
    if (target.components.empty()) {
        throw std::invalid_argument("target: needs at least one component");
    }
    double wsum = 0.0;
    for (const auto &c : target.components) {
        if (c.weight <= 0.0 || c.weight > 1.0) {
            throw std::invalid_argument("target: component weights must lie in (0, 1]");
        }
        if (c.mean.size() != target.d) {
            throw std::invalid_argument("target: component mean has wrong dimension");
        }
        if (c.rank() > target.d || (c.rank() > 0 && c.cov_factor.rows() != target.d)) {
            throw std::invalid_argument("target: covariance factor has wrong shape");
        }
        if (c.mean.norm() > target.support_radius + 1e-12) {
            throw std::invalid_argument("target: component mean outside support radius");
        }
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12) {
        throw std::invalid_argument("target: component weights must sum to 1");
    }
}

MixtureTarget make_point_mass(int d, const Vec &mean) {
    MixtureTarget t;
    t.d = d;
    t.components.push_back({1.0, mean, Mat(d, 0)});
    t.support_radius = std::max(1.0, mean.norm());
    t.nominal_k = 0;
    validate_target(t);
    return t;
}

MixtureTarget make_gaussian_iso(int d, const Vec &mean, double sigma) {
    MixtureTarget t;
    t.d = d;
    t.components.push_back({1.0, mean, sigma * Mat::Identity(d, d)});
    t.support_radius = std::max(1.0, mean.norm());
    t.nominal_k = d;
    validate_target(t);
    return t;
}

MixtureTarget make_rank_k_gaussian(int d, int k, std::uint64_t seed) {
    MixtureTarget t;
    t.d = d;
    t.components.push_back({1.0, Vec::Zero(d), embed_frame(d, k, seed)});
    t.support_radius = 1.0;
    t.nominal_k = k;
    validate_target(t);
    return t;
}

MixtureTarget make_gmm(int d, const std::vector<MixtureComponent> &components) {
    MixtureTarget t;
    t.d = d;
    t.components = components;
    for (const auto &c : components) {
        t.support_radius = std::max(t.support_radius, c.mean.norm());
    }
    t.support_radius = std::max(t.support_radius, 1.0);
    validate_target(t);
    return t;
}

Mat embed_frame(int d, int k, std::uint64_t seed) {
    Rng rng = substream(seed, 0x66726d65ULL); // "frme"
    Mat g(d, k);
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < d; ++i) {
            g(i, j) = rng.normal();
        }
    }
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(d, k);
    Mat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    // fix signs so the frame is a canonical function of the seed
    for (int j = 0; j < k; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) = -q.col(j);
        }
    }
    return q;
}

Mat sample_data(const MixtureTarget &target, int n, std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample_data: n must be >= 1");
    }
    Rng rng = substream(seed, 0x64617461ULL); // "data"
    Mat out(n, target.d);
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        std::size_t pick = 0;
        double acc = 0.0;
        for (std::size_t c = 0; c < target.components.size(); ++c) {
            acc += target.components[c].weight;
            if (u < acc) {
                pick = c;
                break;
            }
            pick = c; // falls through to the last component when u ~ 1
        }
        const MixtureComponent &comp = target.components[pick];
        Vec x = comp.mean;
        if (comp.rank() > 0) {
            x.noalias() += comp.cov_factor * rng.normal_vec(comp.rank());
        }
        out.row(i) = x.transpose();
    }
    return out;
}

double log_marginal(const MixtureTarget &target, const Schedule &schedule, const NoisedQuery &q) {
    auto ncs = noised_components(target, schedule, q);
    std::vector<double> r;
    return responsibilities(ncs, r);
}

Vec score(const MixtureTarget &target, const Schedule &schedule, const NoisedQuery &q) {
    auto ncs = noised_components(target, schedule, q);
    std::vector<double> r;
    responsibilities(ncs, r);
    Vec s = Vec::Zero(target.d);
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        s.noalias() += r[i] * ncs[i].g;
    }
    return s;
}

Mat score_jacobian(const MixtureTarget &target, const Schedule &schedule, const NoisedQuery &q) {
    auto ncs = noised_components(target, schedule, q);
    std::vector<double> r;
    responsibilities(ncs, r);
    const int d = target.d;
    Vec s = Vec::Zero(d);
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        s.noalias() += r[i] * ncs[i].g;
    }
    // J = sum_i r_i (g_i g_i^T - C_i^{-1}) - s s^T
    Mat j = Mat::Zero(d, d);
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        j.noalias() += r[i] * (ncs[i].g * ncs[i].g.transpose());
        j.noalias() -= r[i] * ncs[i].llt.solve(Mat::Identity(d, d));
    }
    j.noalias() -= s * s.transpose();
    return j;
}

PosteriorMoments posterior_moments(const MixtureTarget &target, const Schedule &schedule,
                                   const NoisedQuery &q) {
    auto ncs = noised_components(target, schedule, q);
    std::vector<double> r;
    responsibilities(ncs, r);
    const double ab = schedule.alpha_bar_at(q.t);
    const int d = target.d;

    // per-component Gaussian conditioning:
    //   mhat_i = mu_i + sqrt(ab) * Sigma_i C_i^{-1} (x - m_i)
    //   Shat_i = Sigma_i - ab * Sigma_i C_i^{-1} Sigma_i
    std::vector<Vec> mhat(ncs.size());
    std::vector<Mat> shat(ncs.size());
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        const MixtureComponent &c = target.components[i];
        if (c.rank() == 0) {
            mhat[i] = c.mean;
            shat[i] = Mat::Zero(d, d);
            continue;
        }
        const Mat &l = c.cov_factor;
        // Sigma C^{-1} v = L (L^T (C^{-1} v)); note g = -C^{-1}(x - m)
        mhat[i] = c.mean - std::sqrt(ab) * (l * (l.transpose() * ncs[i].g));
        Mat cinv_l = ncs[i].llt.solve(l);
        shat[i] = l * (Mat::Identity(c.rank(), c.rank()) - ab * l.transpose() * cinv_l) *
                  l.transpose();
    }

    PosteriorMoments pm;
    pm.mean = Vec::Zero(d);
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        pm.mean.noalias() += r[i] * mhat[i];
    }
    pm.cov = Mat::Zero(d, d);
    for (std::size_t i = 0; i < ncs.size(); ++i) {
        Vec dm = mhat[i] - pm.mean;
        pm.cov.noalias() += r[i] * shat[i];
        pm.cov.noalias() += r[i] * (dm * dm.transpose());
    }
    return pm;
}

std::string target_table_csv(const MixtureTarget &target) {
    std::ostringstream os;
    os.precision(17);
    os << "component,weight,rank";
    for (int j = 0; j < target.d; ++j) {
        os << ",mean_" << j;
    }
    os << "\n";
    for (std::size_t i = 0; i < target.components.size(); ++i) {
        const auto &c = target.components[i];
        os << i << "," << c.weight << "," << c.rank();
        for (int j = 0; j < target.d; ++j) {
            os << "," << c.mean(j);
        }
        os << "\n";
    }
    return os.str();
}

} // namespace pflab
