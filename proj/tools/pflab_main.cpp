// Command-line front end: schedule/target dumps, sampling, TV estimation,
// dimension estimation, the validation suite, sweeps and plots.
//
// Exit codes: 0 success, 1 validation/runtime failure, 2 config error.

#include "pflab/config.hpp"
#include "pflab/geometry.hpp"
#include "pflab/harness.hpp"
#include "pflab/metrics.hpp"
#include "pflab/sampler.hpp"
#include "pflab/schedule.hpp"
#include "pflab/score_models.hpp"
#include "pflab/targets.hpp"
#include "pflab/validation.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace {

using namespace pflab;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt10(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// "-" means stdout; relative paths land inside --out-dir
class OutputTarget {
public:
    OutputTarget(const std::string &path, const std::string &out_dir) {
        if (path == "-") return;
        std::filesystem::path p(path);
        if (p.is_relative()) p = std::filesystem::path(out_dir) / p;
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        m_file.emplace(p.string());
        if (!*m_file) throw std::runtime_error("cannot open output file '" + p.string() + "'");
    }
    std::ostream &stream() { return m_file ? static_cast<std::ostream &>(*m_file) : std::cout; }

private:
    std::optional<std::ofstream> m_file;
};

TargetSpec target_spec_from_map(const ConfigMap &map) {
    TargetSpec spec;
    spec.family = map.get_or("target", "family", spec.family);
    spec.d = static_cast<int>(map.get_long("target", "d", spec.d));
    spec.k = static_cast<int>(map.get_long("target", "k", spec.k));
    spec.sigma = map.get_double("target", "sigma", spec.sigma);
    if (map.has("target", "mean")) spec.mean = map.get_double_list("target", "mean");
    spec.seed = map.get_u64("target", "seed", spec.seed);
    spec.support_radius = map.get_double("target", "support_radius", spec.support_radius);
    return spec;
}

PerturbationSpec perturb_spec_from_map(const ConfigMap &map) {
    PerturbationSpec spec;
    if (map.has("perturb", "kind")) spec.kind = perturb_kind_from_name(map.get("perturb", "kind"));
    spec.delta = map.get_double("perturb", "delta", spec.delta);
    spec.seed = map.get_u64("perturb", "seed", spec.seed);
    return spec;
}

// numeric CSV reader for the dim subcommand; a leading header line is
// detected by its first field failing to parse
Mat read_points_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read points file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::istringstream fields(line);
        std::string field;
        bool numeric = true;
        while (std::getline(fields, field, ',')) {
            char *end = nullptr;
            double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str()) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (rows.empty()) continue; // header line
            throw std::runtime_error("non-numeric row in '" + path + "'");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged rows in '" + path + "'");
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) throw std::runtime_error("no point rows in '" + path + "'");
    Mat out(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j) out(i, j) = rows[i][j];
    return out;
}

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;

    ConfigMap config() const {
        return config_path.empty() ? ConfigMap() : ConfigMap::from_file(config_path);
    }
};

int cmd_schedule(const GlobalOpts &g, int T, double c0, double c1, const std::string &out_path) {
    ConfigMap cfg = g.config();
    if (T <= 0) T = static_cast<int>(cfg.get_long("schedule", "T", 0));
    if (T <= 0) throw ConfigError("schedule: --T (or config schedule.T) is required");
    if (c0 <= 0) c0 = cfg.get_double("schedule", "c0", 2.0);
    if (c1 <= 0) c1 = cfg.get_double("schedule", "c1", 4.0);

    Schedule s;
    try {
        s = build_schedule({T, c0, c1});
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    OutputTarget out(out_path, g.out_dir);
    out.stream() << "t,beta,alpha,alpha_bar,eta_star,eta_simple\n";
    for (int t = 1; t <= T; ++t) {
        out.stream() << t << "," << fmt17(s.beta_at(t)) << "," << fmt17(s.alpha_at(t)) << ","
                     << fmt17(s.alpha_bar_at(t)) << ",";
        if (t >= 2)
            out.stream() << fmt17(s.eta_star_at(t)) << "," << fmt17(s.eta_simple_at(t));
        else
            out.stream() << ","; // no reverse step into t=0
        out.stream() << "\n";
    }
    return 0;
}

int cmd_target(const GlobalOpts &g, const std::string &target_path,
               const std::string &out_path) {
    ConfigMap cfg = target_path.empty() ? g.config() : ConfigMap::from_file(target_path);
    MixtureTarget target = build_target(target_spec_from_map(cfg));
    OutputTarget out(out_path, g.out_dir);
    out.stream() << target_table_csv(target);
    return 0;
}

int cmd_sample(const GlobalOpts &g, int T, int d, int n, std::uint64_t seed, bool seed_given,
               const std::string &coeff_name_arg, const std::string &target_path,
               const std::string &perturb_path, const std::string &out_path) {
    ConfigMap base = g.config();
    ConfigMap tcfg = target_path.empty() ? base : ConfigMap::from_file(target_path);
    TargetSpec tspec = target_spec_from_map(tcfg);
    if (d > 0) tspec.d = d;
    if (T <= 0) T = static_cast<int>(base.get_long("schedule", "T", 0));
    if (T <= 0) throw ConfigError("sample: --T is required");
    double c0 = base.get_double("schedule", "c0", 2.0);
    double c1 = base.get_double("schedule", "c1", 4.0);
    if (!seed_given) seed = g.seed_given ? g.seed : 1;

    CoeffChoice choice;
    Schedule schedule;
    try {
        choice = coeff_from_name(coeff_name_arg);
        schedule = build_schedule({T, c0, c1});
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    MixtureTarget target = build_target(tspec);
    auto exact = std::make_shared<ExactScoreField>(target, schedule);
    std::shared_ptr<const ScoreField> field = exact;
    if (!perturb_path.empty() || base.has("perturb", "kind")) {
        ConfigMap pcfg = perturb_path.empty() ? base : ConfigMap::from_file(perturb_path);
        try {
            field = perturb(exact, perturb_spec_from_map(pcfg));
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
    }

    TrajectoryBatch batch = run_reverse(schedule, target.d, *field, n, seed, choice);

    OutputTarget out(out_path, g.out_dir);
    out.stream() << "point_id";
    for (int j = 1; j <= target.d; ++j) out.stream() << ",y" << j;
    out.stream() << ",log_density\n";
    for (int i = 0; i < batch.n(); ++i) {
        out.stream() << i;
        for (int j = 0; j < batch.d(); ++j) out.stream() << "," << fmt17(batch.points(i, j));
        double lp = batch.flagged[i] ? std::numeric_limits<double>::quiet_NaN()
                                     : batch.log_density(i);
        out.stream() << "," << fmt17(lp) << "\n";
    }
    return 0;
}

int cmd_tv(const GlobalOpts &g, const std::string &in_path, const std::string &target_path,
           int T, double c0, double c1, const std::string &out_path) {
    ConfigMap base = g.config();
    ConfigMap tcfg = target_path.empty() ? base : ConfigMap::from_file(target_path);
    MixtureTarget target = build_target(target_spec_from_map(tcfg));
    if (T <= 0) T = static_cast<int>(base.get_long("schedule", "T", 0));
    if (T <= 0) throw ConfigError("tv: --T is required to rebuild the schedule");
    if (c0 <= 0) c0 = base.get_double("schedule", "c0", 2.0);
    if (c1 <= 0) c1 = base.get_double("schedule", "c1", 4.0);
    Schedule schedule;
    try {
        schedule = build_schedule({T, c0, c1});
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }

    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot read sample file '" + in_path + "'");
    std::vector<std::vector<double>> coords;
    std::vector<double> logp;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.rfind("point_id", 0) == 0) continue;
        std::vector<double> fields;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(std::strtod(field.c_str(), nullptr));
        if (fields.size() < 3) throw std::runtime_error("malformed sample row in '" + in_path + "'");
        coords.push_back({fields.begin() + 1, fields.end() - 1});
        logp.push_back(fields.back());
    }
    if (coords.empty()) throw std::runtime_error("no sample rows in '" + in_path + "'");
    if (static_cast<int>(coords.front().size()) != target.d)
        throw ConfigError("sample dimension does not match target.d");

    TrajectoryBatch batch;
    batch.t = 1;
    batch.points.resize(coords.size(), target.d);
    batch.log_density.resize(coords.size());
    batch.logdet_accum = Vec::Zero(coords.size());
    batch.flagged.assign(coords.size(), 0);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        for (int j = 0; j < target.d; ++j) batch.points(i, j) = coords[i][j];
        batch.log_density(i) = logp[i];
        batch.flagged[i] = std::isfinite(logp[i]) ? 0 : 1;
    }

    TvEstimate tv = tv_monte_carlo(batch, target, schedule);
    OutputTarget out(out_path, g.out_dir);
    out.stream() << "tv,stderr,n_used,n_flagged\n"
                 << fmt10(tv.value) << "," << fmt10(tv.stderr_) << "," << tv.n_used << ","
                 << tv.n_flagged << "\n";
    return 0;
}

int cmd_dim(const GlobalOpts &g, const std::string &points_path, const std::string &eps_arg,
            const std::string &out_path) {
    Mat points = read_points_csv(points_path);
    std::vector<double> eps;
    for (const auto &item : split_list(eps_arg)) eps.push_back(std::stod(item));
    if (eps.empty()) throw ConfigError("dim: --eps needs a comma-separated list");

    CoveringCurve curve;
    try {
        curve = covering_curve(points, eps);
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    DimEstimate est = dimension_estimate(curve);
    OutputTarget out(out_path, g.out_dir);
    out.stream() << "epsilon,net_size,lower_bound\n";
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
        long net = std::lround(std::exp(curve.log_counts[i]));
        long lower = std::lround(std::exp(curve.lower_bounds[i]));
        out.stream() << fmt10(curve.epsilons[i]) << "," << net << "," << lower << "\n";
    }
    std::cerr << "k_hat=" << fmt10(est.k_hat) << (est.flat ? " (flat curve)" : "") << "\n";
    return 0;
}

int cmd_validate(const GlobalOpts &g, const std::string &out_path) {
    std::uint64_t seed = g.seed_given ? g.seed : 20240817ULL;
    std::vector<SuiteResult> results = run_validation_suite(seed);
    OutputTarget out(out_path, g.out_dir);
    out.stream() << "check,trials,failures,max_slack\n";
    bool any_failed = false;
    for (const auto &r : results) {
        out.stream() << r.check << "," << r.trials << "," << r.failures << ","
                     << fmt10(r.max_slack) << "\n";
        if (r.failures > 0) any_failed = true;
    }
    return any_failed ? 1 : 0;
}

int cmd_sweep(const GlobalOpts &g) {
    if (g.config_path.empty()) throw ConfigError("sweep: --config is required");
    ExperimentConfig cfg = ExperimentConfig::from_map(ConfigMap::from_file(g.config_path));
    if (g.seed_given) cfg.sample_seed = g.seed;
    std::filesystem::create_directories(g.out_dir);
    std::string report_path = (std::filesystem::path(g.out_dir) / cfg.report_name).string();
    SweepReport report = run_sweep(cfg, report_path);
    write_fits_csv((std::filesystem::path(g.out_dir) / cfg.fits_name).string(), report.fits);
    for (const auto &row : report.rows)
        std::cerr << row.run_id << " " << row.status << " tv=" << fmt10(row.tv)
                  << " wall_ms=" << row.wall_ms << "\n";
    return 0;
}

int cmd_plot(const GlobalOpts &g, const std::string &report_arg, double bound_c) {
    std::string report_path = report_arg;
    if (report_path.empty())
        report_path = (std::filesystem::path(g.out_dir) / "report.csv").string();
    SweepReport report = load_report(report_path);
    std::filesystem::create_directories(g.out_dir);
    try {
        emit_plots(report, bound_c, g.out_dir);
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"probability-flow sampling laboratory"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "config file (key-value text or .json)");
    app.add_option("--out-dir", g.out_dir, "directory for relative output paths");
    auto *seed_opt = app.add_option("--seed", g.seed, "global seed override");
    app.add_option("--threads", g.threads, "worker count (this build runs the grid serially)");

    // schedule
    auto *sc = app.add_subcommand("schedule", "dump schedule table as CSV");
    int sc_T = 0;
    double sc_c0 = 0, sc_c1 = 0;
    std::string sc_out = "-";
    sc->add_option("--T", sc_T, "step count");
    sc->add_option("--c0", sc_c0, "beta_1 exponent (default 2)");
    sc->add_option("--c1", sc_c1, "growth constant (default 4)");
    sc->add_option("--out", sc_out, "output CSV ('-' = stdout)");

    // target
    auto *tg = app.add_subcommand("target", "dump target component table as CSV");
    std::string tg_target, tg_out = "-";
    tg->add_option("--target", tg_target, "target config file");
    tg->add_option("--out", tg_out, "output CSV ('-' = stdout)");

    // sample
    auto *sa = app.add_subcommand("sample", "run the reverse sampler, write points + densities");
    int sa_T = 0, sa_d = 0, sa_n = 1000;
    std::uint64_t sa_seed = 1;
    std::string sa_coeff = "star", sa_target, sa_perturb, sa_out = "-";
    sa->add_option("--T", sa_T, "step count");
    sa->add_option("--d", sa_d, "ambient dimension override");
    sa->add_option("--n", sa_n, "number of points");
    auto *sa_seed_opt = sa->add_option("--seed", sa_seed, "sampler seed");
    sa->add_option("--coeff", sa_coeff, "coefficient choice: star|simple");
    sa->add_option("--target", sa_target, "target config file");
    sa->add_option("--perturb", sa_perturb, "perturbation config file");
    sa->add_option("--out", sa_out, "output CSV ('-' = stdout)");

    // tv
    auto *tv = app.add_subcommand("tv", "TV estimate from a sample CSV against a target");
    std::string tv_in, tv_target, tv_out = "-";
    int tv_T = 0;
    double tv_c0 = 0, tv_c1 = 0;
    tv->add_option("--in", tv_in, "sample CSV from the sample subcommand")->required();
    tv->add_option("--target", tv_target, "target config file");
    tv->add_option("--T", tv_T, "step count used when sampling");
    tv->add_option("--c0", tv_c0, "schedule c0 (default 2)");
    tv->add_option("--c1", tv_c1, "schedule c1 (default 4)");
    tv->add_option("--out", tv_out, "output CSV ('-' = stdout)");

    // dim
    auto *dm = app.add_subcommand("dim", "covering-number dimension estimate of a point cloud");
    std::string dm_points, dm_eps, dm_out = "-";
    dm->add_option("--points", dm_points, "CSV of point coordinates")->required();
    dm->add_option("--eps", dm_eps, "comma list of strictly decreasing scales")->required();
    dm->add_option("--out", dm_out, "output CSV ('-' = stdout)");

    // validate
    auto *va = app.add_subcommand("validate", "run the randomized validation suites");
    std::string va_out = "-";
    va->add_option("--out", va_out, "output CSV ('-' = stdout)");

    // sweep
    app.add_subcommand("sweep", "run the configured experiment grid");

    // plot
    auto *pl = app.add_subcommand("plot", "render SVG plots from a sweep report");
    std::string pl_report;
    double pl_bound_c = 1.0;
    pl->add_option("--report", pl_report, "sweep report CSV (default <out-dir>/report.csv)");
    pl->add_option("--bound-c", pl_bound_c, "constant for the bound overlay");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    g.seed_given = seed_opt->count() > 0;
    try {
        if (sc->parsed()) return cmd_schedule(g, sc_T, sc_c0, sc_c1, sc_out);
        if (tg->parsed()) return cmd_target(g, tg_target, tg_out);
        if (sa->parsed())
            return cmd_sample(g, sa_T, sa_d, sa_n, sa_seed, sa_seed_opt->count() > 0, sa_coeff,
                              sa_target, sa_perturb, sa_out);
        if (tv->parsed()) return cmd_tv(g, tv_in, tv_target, tv_T, tv_c0, tv_c1, tv_out);
        if (dm->parsed()) return cmd_dim(g, dm_points, dm_eps, dm_out);
        if (va->parsed()) return cmd_validate(g, va_out);
        if (app.get_subcommand("sweep")->parsed()) return cmd_sweep(g);
        if (pl->parsed()) return cmd_plot(g, pl_report, pl_bound_c);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
