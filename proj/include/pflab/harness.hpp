#pragma once

#include "pflab/config.hpp"
#include "pflab/metrics.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pflab {

// Target construction recipe as it appears in config files. Families:
//   point_mass       delta at `mean` (zero by default)
//   gaussian_iso     N(mean, sigma^2 I)
//   rank_k_gaussian  zero-mean Gaussian on a seeded k-dim subspace
struct TargetSpec {
    std::string family = "rank_k_gaussian";
    int d = 32;
    int k = 2;
    double sigma = 1.0;
    std::vector<double> mean; // empty = origin
    std::uint64_t seed = 11;
    double support_radius = -1.0; // < 0: derived from the construction

    bool operator==(const TargetSpec &) const = default;
};

MixtureTarget build_target(const TargetSpec &spec);

// Full experiment description; `to_map` emits every field so that
// from_map(to_map(c)) == c exactly (lossless round-trip).
struct ExperimentConfig {
    TargetSpec target;
    std::vector<int> k_list = {1, 2, 4, 8}; // rank_k_gaussian only
    double c0 = 2.0;
    double c1 = 4.0;
    std::vector<int> T_list = {50, 100, 200, 400, 800};
    CoeffChoice coeff = CoeffChoice::star;
    int sample_n = 4000;
    std::uint64_t sample_seed = 1;
    PerturbKind perturb_kind = PerturbKind::tangential;
    std::vector<double> delta_list = {0.0, 0.01, 0.03, 0.1};
    std::uint64_t perturb_seed = 7;
    int error_n = 256; // forward samples per step for the error functionals
    int tv_n = 2000;
    int dim_n = 2000;
    double bound_c = 1.0; // constant used for the bound overlay
    std::string report_name = "report.csv";
    std::string fits_name = "report_fits.csv";

    static ExperimentConfig from_map(const ConfigMap &map);
    ConfigMap to_map() const;

    bool operator==(const ExperimentConfig &) const = default;
};

struct SweepRow {
    std::string run_id;
    int T = 0;
    int d = 0;
    int k_nominal = 0;
    double k_hat = 0.0;
    std::string coeff;
    double delta = 0.0;
    double eps_score = 0.0;
    double eps_jacobi = 0.0;
    double tv = 0.0;
    double tv_stderr = 0.0;
    long n_flagged = 0;
    std::uint64_t seed = 0;
    long wall_ms = 0;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
};

struct GroupFit {
    int d = 0;
    int k = 0;
    double delta = 0.0;
    std::string coeff;
    int n_points = 0; // points surviving the resolution filter
    bool fitted = false;
    RateFit fit;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<GroupFit> fits;
};

// CSV header for the sweep report (status column trailing so failed runs
// are recorded without aborting the sweep).
std::string sweep_row_header();
std::string format_sweep_row(const SweepRow &row);

// Executes the (k, delta, T) grid in deterministic order, appending each
// finished row to csv_path immediately. Rows already present in the file
// (matched by run_id) are kept verbatim, so a killed sweep resumes where
// it stopped and produces the same final file as an uninterrupted run.
// Per-run seeds depend only on the run id, never on execution order.
SweepReport run_sweep(const ExperimentConfig &config, const std::string &csv_path);

// Rate fits per (d, k, delta) group over ok rows: estimates below the
// noise floor (tv < 2 stderr) are excluded; surviving noisy values are
// floored at their standard error before the log-log fit.
std::vector<GroupFit> fit_groups(const std::vector<SweepRow> &rows);

void write_fits_csv(const std::string &path, const std::vector<GroupFit> &fits);

// Parses a sweep CSV back into a report (fits recomputed).
SweepReport load_report(const std::string &csv_path);

// Writes tv_vs_T.svg (log-log, bound overlay dashed where vacuous),
// tv_vs_delta.svg (at the largest T with multiple deltas) and
// khat_vs_k.svg. Throws std::invalid_argument on an empty report.
void emit_plots(const SweepReport &report, double bound_c, const std::string &out_dir);

} // namespace pflab
