#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace pflab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Compensated (Kahan) summation. Used wherever a reduction must be
// insensitive to element order: the compensated result differs across
// permutations by at most a few ulps, versus O(n*eps) for a plain loop.
class KahanSum {
public:
    void add(double x) {
        double y = x - m_comp;
        double t = m_sum + y;
        m_comp = (t - m_sum) - y;
        m_sum = t;
    }
    double value() const { return m_sum; }

private:
    double m_sum = 0.0;
    double m_comp = 0.0;
};

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;   // unbiased sample variance (0 when n < 2)
    std::size_t n = 0;
};

// Order-robust mean/variance of a sample (two compensated passes).
inline MeanVar mean_var(const std::vector<double> &xs) {
    MeanVar out;
    out.n = xs.size();
    if (xs.empty()) {
        return out;
    }
    KahanSum s;
    for (double x : xs) {
        s.add(x);
    }
    out.mean = s.value() / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        KahanSum q;
        for (double x : xs) {
            double d = x - out.mean;
            q.add(d * d);
        }
        out.var = q.value() / static_cast<double>(xs.size() - 1);
    }
    return out;
}

// log|det M| with sign via partial-pivot LU; returns false when a pivot
// underflows to zero (the caller decides how to flag the point).
inline bool signed_log_abs_det(const Mat &m, double &log_abs_det, double &sign) {
    Eigen::PartialPivLU<Mat> lu(m);
    const Mat &u = lu.matrixLU();
    double acc = 0.0;
    sign = lu.permutationP().determinant() > 0 ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        double p = u(i, i);
        if (p == 0.0) {
            log_abs_det = -std::numeric_limits<double>::infinity();
            sign = 0.0;
            return false;
        }
        if (p < 0.0) {
            sign = -sign;
        }
        acc += std::log(std::abs(p));
    }
    log_abs_det = acc;
    return true;
}

// Spectral norm (largest singular value) for small dense matrices.
inline double spectral_norm(const Mat &a) {
    return a.jacobiSvd().singularValues()(0);
}

} // namespace pflab
