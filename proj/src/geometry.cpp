#include "pflab/geometry.hpp"

#include "pflab/rng.hpp"
#include "pflab/targets.hpp"

#include <cmath>
#include <stdexcept>

namespace pflab {

std::vector<int> greedy_net(const Mat &points, double epsilon) {
    if (epsilon <= 0.0) {
        throw std::invalid_argument("greedy_net: epsilon must be positive");
    }
    const auto n = points.rows();
    if (n < 1) {
        throw std::invalid_argument("greedy_net: empty cloud");
    }
    const double eps2 = epsilon * epsilon;
    Vec row_sq = points.rowwise().squaredNorm();

    std::vector<int> net{0};
    // squared distance from each point to its nearest selected center
    Vec d2 = (row_sq.array() - 2.0 * (points * points.row(0).transpose()).array() + row_sq(0))
                 .max(0.0);
    for (;;) {
        Eigen::Index far = 0;
        double far_d2 = d2.maxCoeff(&far);
        if (far_d2 <= eps2) {
            break;
        }
        net.push_back(static_cast<int>(far));
        Vec cand = (row_sq.array() - 2.0 * (points * points.row(far).transpose()).array() +
                    row_sq(far))
                       .max(0.0);
        d2 = d2.cwiseMin(cand);
    }
    return net;
}

CoveringCurve covering_curve(const Mat &points, const std::vector<double> &epsilons) {
    if (epsilons.empty()) {
        throw std::invalid_argument("covering_curve: need at least one epsilon");
    }
    for (std::size_t i = 0; i + 1 < epsilons.size(); ++i) {
        if (!(epsilons[i] > epsilons[i + 1])) {
            throw std::invalid_argument("covering_curve: epsilons must be strictly decreasing");
        }
    }
    CoveringCurve curve;
    curve.epsilons = epsilons;
    for (double eps : epsilons) {
        if (eps <= 0.0) {
            throw std::invalid_argument("covering_curve: epsilons must be positive");
        }
        curve.log_counts.push_back(std::log(static_cast<double>(greedy_net(points, eps).size())));
        // a 2eps-separated set lower-bounds the eps-covering number: no
        // eps-ball can contain two of its points
        curve.lower_bounds.push_back(
            std::log(static_cast<double>(greedy_net(points, 2.0 * eps).size())));
    }
    return curve;
}

DimEstimate dimension_estimate(const CoveringCurve &curve) {
    const std::size_t m = curve.epsilons.size();
    if (m < 2) {
        throw std::invalid_argument("dimension_estimate: need at least 2 epsilons");
    }
    DimEstimate est;
    bool all_equal = true;
    for (std::size_t i = 1; i < m; ++i) {
        all_equal = all_equal && curve.log_counts[i] == curve.log_counts[0];
    }
    if (all_equal) {
        est.flat = true;
        est.k_hat = 0.0;
        return est;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += std::log(1.0 / curve.epsilons[i]);
        my += curve.log_counts[i];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double dx = std::log(1.0 / curve.epsilons[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (curve.log_counts[i] - my);
    }
    est.k_hat = sxy / sxx;
    return est;
}

Mat cube_cloud(int k, int n, double side, std::uint64_t seed) {
    Rng rng = substream(seed, 0x63756265ULL); // "cube"
    Mat out(n, k);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            out(i, j) = side * rng.uniform();
        }
    }
    return out;
}

Mat torus_cloud(int k, int n, double radius, std::uint64_t seed) {
    Rng rng = substream(seed, 0x746f7275ULL); // "toru"
    Mat out(n, 2 * k);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            double th = 2.0 * M_PI * rng.uniform();
            out(i, 2 * j) = radius * std::cos(th);
            out(i, 2 * j + 1) = radius * std::sin(th);
        }
    }
    return out;
}

Mat embed_cloud(const Mat &low, int d, std::uint64_t seed) {
    const int r = static_cast<int>(low.cols());
    if (d < r) {
        throw std::invalid_argument("embed_cloud: ambient dimension below cloud dimension");
    }
    Mat frame = embed_frame(d, r, seed); // d x r, orthonormal columns
    return low * frame.transpose();
}

} // namespace pflab
