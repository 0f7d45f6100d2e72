#include "pflab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pflab {

const char *coeff_name(CoeffChoice c) {
    return c == CoeffChoice::star ? "star" : "simple";
}

CoeffChoice coeff_from_name(const std::string &name) {
    if (name == "star") {
        return CoeffChoice::star;
    }
    if (name == "simple") {
        return CoeffChoice::simple;
    }
    throw std::invalid_argument("unknown coefficient choice: " + name);
}

Schedule build_schedule(const ScheduleParams &params) {
    if (params.T < 2) {
        throw std::invalid_argument("schedule: T must be >= 2");
    }
    if (params.c0 <= 0.0 || params.c1 <= 0.0) {
        throw std::invalid_argument("schedule: c0 and c1 must be positive");
    }
    const int T = params.T;
    const double rate = params.c1 * std::log(static_cast<double>(T)) / T;
    if (rate >= 1.0) {
        throw std::invalid_argument("schedule: c1*log(T)/T must be < 1");
    }

    Schedule s;
    s.params = params;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.eta_star.resize(T - 1);
    s.eta_simple.resize(T - 1);

    s.beta[0] = std::pow(static_cast<double>(T), -params.c0);
    // grow = beta_1*(1+rate)^t, advanced incrementally and clamped at 1
    double grow = s.beta[0];
    for (int t = 1; t < T; ++t) {
        grow = std::min(grow * (1.0 + rate), 1.0);
        s.beta[t] = rate * grow;
    }

    for (int t = 0; t < T; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = (t == 0 ? s.alpha[0] : s.alpha_bar[t - 1] * s.alpha[t]);
    }

    for (int t = 2; t <= T; ++t) {
        double a = s.alpha[t - 1];
        double ab = s.alpha_bar[t - 1];
        s.eta_star[t - 2] = 1.0 - ab - std::sqrt((1.0 - ab) * (a - ab));
        s.eta_simple[t - 2] = (1.0 - a) / 2.0;
    }
    return s;
}

double coefficient(const Schedule &schedule, int t, CoeffChoice choice) {
    if (t < 2 || t > schedule.T()) {
        throw std::out_of_range("coefficient: step index must satisfy 2 <= t <= T");
    }
    return choice == CoeffChoice::star ? schedule.eta_star_at(t) : schedule.eta_simple_at(t);
}

std::vector<ScheduleCheck> validate_schedule(const Schedule &s) {
    const int T = s.T();
    const double rate = s.params.c1 * std::log(static_cast<double>(T)) / T;
    std::vector<ScheduleCheck> out;

    // (a) alpha_t >= 1 - c1*log T/T >= 1/2
    {
        double slack = (1.0 - rate) - 0.5;
        for (int t = 1; t <= T; ++t) {
            slack = std::min(slack, s.alpha_at(t) - (1.0 - rate));
        }
        out.push_back({"lower_bound_alpha", slack >= 0.0, slack});
    }

    // (b) (1-a)/(1-ab) <= (1-a)/(a-ab) <= 8*c1*log T/T for t >= 2
    {
        double slack = std::numeric_limits<double>::infinity();
        for (int t = 2; t <= T; ++t) {
            double a = s.alpha_at(t);
            double ab = s.alpha_bar_at(t);
            double mid = (1.0 - a) / (a - ab);
            slack = std::min(slack, mid - (1.0 - a) / (1.0 - ab));
            slack = std::min(slack, 8.0 * rate - mid);
        }
        out.push_back({"step_noise_ratio", slack >= 0.0, slack});
    }

    // (c) 0 <= eta_star - (1-a)/2 <= (1-a)^2/(1-ab) for t >= 2
    {
        double slack = std::numeric_limits<double>::infinity();
        for (int t = 2; t <= T; ++t) {
            double a = s.alpha_at(t);
            double ab = s.alpha_bar_at(t);
            double gap = s.eta_star_at(t) - (1.0 - a) / 2.0;
            slack = std::min(slack, gap);
            slack = std::min(slack, (1.0 - a) * (1.0 - a) / (1.0 - ab) - gap);
        }
        out.push_back({"coefficient_sandwich", slack >= 0.0, slack});
    }

    // (d) informational: terminal signal retention and its implied exponent
    {
        double ab_T = s.alpha_bar_at(T);
        out.push_back({"alpha_bar_T", true, ab_T});
        out.push_back({"alpha_bar_T_exponent", true,
                       std::log(1.0 / ab_T) / std::log(static_cast<double>(T))});
    }
    return out;
}

} // namespace pflab
