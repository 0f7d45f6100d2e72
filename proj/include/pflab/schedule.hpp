#pragma once

#include <string>
#include <vector>

namespace pflab {

struct ScheduleParams {
    int T = 0;        // step count, >= 2
    double c0 = 2.0;  // beta_1 = T^(-c0)
    double c1 = 4.0;  // growth-rate constant; requires c1*log(T)/T < 1
};

enum class CoeffChoice { star, simple };

const char *coeff_name(CoeffChoice c);
CoeffChoice coeff_from_name(const std::string &name);

// Noise schedule and reverse-step coefficients.
//   beta_1     = T^(-c0)
//   beta_{t+1} = (c1*log T/T) * min{ beta_1*(1 + c1*log T/T)^t , 1 }
//   alpha_t    = 1 - beta_t,   alpha_bar_t = prod_{i<=t} alpha_i
//   eta_star_t = 1 - alpha_bar_t - sqrt((1-alpha_bar_t)(alpha_t-alpha_bar_t))
//   eta_simple_t = (1 - alpha_t)/2
// All vectors are stored 0-based; use the *_at(t) accessors for the
// 1-based step index t. eta_* sequences cover t = 2..T only.
struct Schedule {
    ScheduleParams params;
    std::vector<double> beta;        // size T
    std::vector<double> alpha;       // size T
    std::vector<double> alpha_bar;   // size T
    std::vector<double> eta_star;    // size T-1, [0] is t=2
    std::vector<double> eta_simple;  // size T-1, [0] is t=2

    int T() const { return params.T; }
    double beta_at(int t) const { return beta[t - 1]; }
    double alpha_at(int t) const { return alpha[t - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[t - 1]; }
    double eta_star_at(int t) const { return eta_star[t - 2]; }
    double eta_simple_at(int t) const { return eta_simple[t - 2]; }
};

// Throws std::invalid_argument when T < 2 or c1*log(T)/T >= 1.
Schedule build_schedule(const ScheduleParams &params);

// eta coefficient for step t (2 <= t <= T); throws std::out_of_range.
double coefficient(const Schedule &schedule, int t, CoeffChoice choice);

struct ScheduleCheck {
    std::string name;
    bool passed = false;
    // Worst-case margin by which the inequality holds (negative on fail).
    // Informational entries (alpha_bar_T report) carry the value itself.
    double slack = 0.0;
};

// Named checks on a built schedule; failures are recorded, never thrown:
//   lower_bound_alpha      alpha_t >= 1 - c1*log T/T  and  1 - c1*log T/T >= 1/2
//   step_noise_ratio       (1-a)/(1-ab) <= (1-a)/(a-ab) <= 8*c1*log T/T   (t >= 2)
//   coefficient_sandwich   0 <= eta_star - (1-a)/2 <= (1-a)^2/(1-ab)      (t >= 2)
//   alpha_bar_T            informational: slack = alpha_bar_T
//   alpha_bar_T_exponent   informational: slack = log(1/alpha_bar_T)/log T
std::vector<ScheduleCheck> validate_schedule(const Schedule &schedule);

} // namespace pflab
