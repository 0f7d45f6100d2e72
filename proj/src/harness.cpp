#include "pflab/harness.hpp"

#include "pflab/geometry.hpp"
#include "pflab/rng.hpp"
#include "pflab/sampler.hpp"
#include "pflab/svg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pflab {

namespace {

std::uint64_t fnv1a64(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt_u64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(v));
    return buf;
}

std::string sanitize_status(std::string s) {
    for (char &c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

std::vector<std::string> split_fields(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

} // namespace

// ---- target construction -------------------------------------------------

MixtureTarget build_target(const TargetSpec &spec) {
    if (spec.d < 1) throw ConfigError("target.d must be >= 1");
    Vec mean = Vec::Zero(spec.d);
    if (spec.mean.size() == 1) {
        mean.setConstant(spec.mean[0]);
    } else if (!spec.mean.empty()) {
        if (static_cast<int>(spec.mean.size()) != spec.d)
            throw ConfigError("target.mean must have 1 or d entries");
        for (int i = 0; i < spec.d; ++i) mean(i) = spec.mean[i];
    }

    MixtureTarget target;
    if (spec.family == "point_mass") {
        target = make_point_mass(spec.d, mean);
    } else if (spec.family == "gaussian_iso") {
        if (!(spec.sigma > 0.0)) throw ConfigError("target.sigma must be > 0");
        target = make_gaussian_iso(spec.d, mean, spec.sigma);
    } else if (spec.family == "rank_k_gaussian") {
        if (spec.k < 1 || spec.k > spec.d)
            throw ConfigError("target.k must be in [1, d] for rank_k_gaussian");
        target = make_rank_k_gaussian(spec.d, spec.k, spec.seed);
    } else {
        throw ConfigError("unknown target.family '" + spec.family + "'");
    }
    if (spec.support_radius >= 0.0) {
        target.support_radius = spec.support_radius;
        try {
            validate_target(target);
        } catch (const std::invalid_argument &e) {
            throw ConfigError(std::string("target.support_radius too small: ") + e.what());
        }
    }
    return target;
}

// ---- config mapping --------------------------------------------------------

ExperimentConfig ExperimentConfig::from_map(const ConfigMap &map) {
    ExperimentConfig c;
    c.target.family = map.get_or("target", "family", c.target.family);
    c.target.d = static_cast<int>(map.get_long("target", "d", c.target.d));
    c.target.k = static_cast<int>(map.get_long("target", "k", c.target.k));
    c.target.sigma = map.get_double("target", "sigma", c.target.sigma);
    if (map.has("target", "mean")) c.target.mean = map.get_double_list("target", "mean");
    c.target.seed = map.get_u64("target", "seed", c.target.seed);
    c.target.support_radius =
        map.get_double("target", "support_radius", c.target.support_radius);

    c.c0 = map.get_double("schedule", "c0", c.c0);
    c.c1 = map.get_double("schedule", "c1", c.c1);
    if (map.has("schedule", "T_list")) {
        c.T_list.clear();
        for (long t : map.get_long_list("schedule", "T_list"))
            c.T_list.push_back(static_cast<int>(t));
    }

    c.sample_n = static_cast<int>(map.get_long("sampler", "n", c.sample_n));
    c.sample_seed = map.get_u64("sampler", "seed", c.sample_seed);
    if (map.has("sampler", "coeff")) {
        try {
            c.coeff = coeff_from_name(map.get("sampler", "coeff"));
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
    }

    if (map.has("perturb", "kind")) {
        try {
            c.perturb_kind = perturb_kind_from_name(map.get("perturb", "kind"));
        } catch (const std::invalid_argument &e) {
            throw ConfigError(e.what());
        }
    }
    if (map.has("perturb", "delta_list"))
        c.delta_list = map.get_double_list("perturb", "delta_list");
    c.perturb_seed = map.get_u64("perturb", "seed", c.perturb_seed);
    c.error_n = static_cast<int>(map.get_long("perturb", "error_n", c.error_n));

    c.tv_n = static_cast<int>(map.get_long("tv", "n", c.tv_n));
    c.dim_n = static_cast<int>(map.get_long("dim", "n", c.dim_n));

    if (map.has("sweep", "k_list")) {
        c.k_list.clear();
        for (long k : map.get_long_list("sweep", "k_list"))
            c.k_list.push_back(static_cast<int>(k));
    }
    c.bound_c = map.get_double("sweep", "bound_c", c.bound_c);
    c.report_name = map.get_or("sweep", "report", c.report_name);
    c.fits_name = map.get_or("sweep", "fits", c.fits_name);

    if (c.sample_n < 1 || c.tv_n < 1 || c.error_n < 1 || c.dim_n < 1)
        throw ConfigError("sample/tv/error/dim counts must be >= 1");
    if (c.tv_n > c.sample_n)
        throw ConfigError("tv.n must not exceed sampler.n (TV reuses the sampled batch)");
    for (double d : c.delta_list)
        if (d < 0.0) throw ConfigError("perturb.delta_list entries must be >= 0");
    if (c.target.family != "rank_k_gaussian" && c.k_list.size() > 1)
        throw ConfigError("sweep.k_list with several entries requires target.family = "
                          "rank_k_gaussian");
    return c;
}

ConfigMap ExperimentConfig::to_map() const {
    ConfigMap m;
    m.set("target", "family", target.family);
    m.set("target", "d", std::to_string(target.d));
    m.set("target", "k", std::to_string(target.k));
    m.set("target", "sigma", fmt_g(target.sigma));
    if (!target.mean.empty()) {
        std::string joined;
        for (double v : target.mean) {
            if (!joined.empty()) joined += ",";
            joined += fmt_g(v);
        }
        m.set("target", "mean", joined);
    }
    m.set("target", "seed", fmt_u64(target.seed));
    m.set("target", "support_radius", fmt_g(target.support_radius));

    m.set("schedule", "c0", fmt_g(c0));
    m.set("schedule", "c1", fmt_g(c1));
    std::string ts;
    for (int t : T_list) {
        if (!ts.empty()) ts += ",";
        ts += std::to_string(t);
    }
    m.set("schedule", "T_list", ts);

    m.set("sampler", "n", std::to_string(sample_n));
    m.set("sampler", "seed", fmt_u64(sample_seed));
    m.set("sampler", "coeff", coeff_name(coeff));

    m.set("perturb", "kind", perturb_kind_name(perturb_kind));
    std::string ds;
    for (double v : delta_list) {
        if (!ds.empty()) ds += ",";
        ds += fmt_g(v);
    }
    m.set("perturb", "delta_list", ds);
    m.set("perturb", "seed", fmt_u64(perturb_seed));
    m.set("perturb", "error_n", std::to_string(error_n));

    m.set("tv", "n", std::to_string(tv_n));
    m.set("dim", "n", std::to_string(dim_n));

    std::string ks;
    for (int k : k_list) {
        if (!ks.empty()) ks += ",";
        ks += std::to_string(k);
    }
    m.set("sweep", "k_list", ks);
    m.set("sweep", "bound_c", fmt_g(bound_c));
    m.set("sweep", "report", report_name);
    m.set("sweep", "fits", fits_name);
    return m;
}

// ---- sweep rows ------------------------------------------------------------

std::string sweep_row_header() {
    return "run_id,T,d,k_nominal,k_hat,coeff,delta,eps_score,eps_jacobi,tv,tv_stderr,"
           "n_flagged,seed,wall_ms,status";
}

std::string format_sweep_row(const SweepRow &r) {
    std::ostringstream out;
    out << r.run_id << "," << r.T << "," << r.d << "," << r.k_nominal << "," << fmt_g(r.k_hat)
        << "," << r.coeff << "," << fmt_g(r.delta) << "," << fmt_g(r.eps_score) << ","
        << fmt_g(r.eps_jacobi) << "," << fmt_g(r.tv) << "," << fmt_g(r.tv_stderr) << ","
        << r.n_flagged << "," << fmt_u64(r.seed) << "," << r.wall_ms << ","
        << sanitize_status(r.status);
    return out.str();
}

namespace {

bool parse_sweep_row(const std::string &line, SweepRow &row) {
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 15) return false;
    try {
        row.run_id = f[0];
        row.T = std::stoi(f[1]);
        row.d = std::stoi(f[2]);
        row.k_nominal = std::stoi(f[3]);
        row.k_hat = std::stod(f[4]);
        row.coeff = f[5];
        row.delta = std::stod(f[6]);
        row.eps_score = std::stod(f[7]);
        row.eps_jacobi = std::stod(f[8]);
        row.tv = std::stod(f[9]);
        row.tv_stderr = std::stod(f[10]);
        row.n_flagged = std::stol(f[11]);
        row.seed = std::stoull(f[12]);
        row.wall_ms = std::stol(f[13]);
        row.status = f[14];
    } catch (const std::exception &) {
        return false;
    }
    return row.run_id.size() > 0;
}

// first min(limit, #unflagged) unflagged points of the batch
Mat unflagged_points(const TrajectoryBatch &batch, int limit) {
    int take = 0;
    for (int i = 0; i < batch.n() && take < limit; ++i)
        if (!batch.flagged[i]) ++take;
    Mat out(take, batch.d());
    int r = 0;
    for (int i = 0; i < batch.n() && r < take; ++i)
        if (!batch.flagged[i]) out.row(r++) = batch.points.row(i);
    return out;
}

TrajectoryBatch batch_head(const TrajectoryBatch &batch, int m) {
    m = std::min<int>(m, batch.n());
    TrajectoryBatch out;
    out.t = batch.t;
    out.points = batch.points.topRows(m);
    out.log_density = batch.log_density.head(m);
    out.logdet_accum = batch.logdet_accum.head(m);
    out.flagged.assign(batch.flagged.begin(), batch.flagged.begin() + m);
    return out;
}

// covering-slope estimate of the generated cloud on a scale ladder set by
// the cloud's own rms radius (informational column; the calibrated clouds
// in geometry are the accuracy-tested path)
double batch_k_hat(const TrajectoryBatch &batch, int limit) {
    Mat pts = unflagged_points(batch, limit);
    if (pts.rows() < 32) return std::numeric_limits<double>::quiet_NaN();
    Vec center = pts.colwise().mean();
    double rms = std::sqrt((pts.rowwise() - center.transpose()).squaredNorm() /
                           static_cast<double>(pts.rows()));
    if (!(rms > 1e-9)) return 0.0;
    std::vector<double> ladder = {1.0 * rms, 0.75 * rms, 0.55 * rms, 0.4 * rms};
    CoveringCurve curve = covering_curve(pts, ladder);
    DimEstimate est = dimension_estimate(curve);
    return est.flat ? 0.0 : est.k_hat;
}

struct RunKey {
    int k = 0;
    double delta = 0.0;
    int T = 0;
};

std::string make_run_id(const ExperimentConfig &cfg, const RunKey &key) {
    std::ostringstream id;
    id << cfg.target.family << "_d" << cfg.target.d << "_k" << key.k << "_T" << key.T << "_"
       << coeff_name(cfg.coeff) << "_dl" << fmt_g(key.delta);
    return id.str();
}

SweepRow execute_run(const ExperimentConfig &cfg, const RunKey &key, const std::string &run_id) {
    SweepRow row;
    row.run_id = run_id;
    row.T = key.T;
    row.d = cfg.target.d;
    row.k_nominal = key.k;
    row.coeff = coeff_name(cfg.coeff);
    row.delta = key.delta;
    row.seed = mix64(cfg.sample_seed ^ fnv1a64(run_id));
    row.k_hat = std::numeric_limits<double>::quiet_NaN();
    row.eps_score = row.eps_jacobi = row.tv = row.tv_stderr =
        std::numeric_limits<double>::quiet_NaN();

    auto t0 = std::chrono::steady_clock::now();
    try {
        TargetSpec tspec = cfg.target;
        tspec.k = key.k;
        MixtureTarget target = build_target(tspec);
        Schedule schedule = build_schedule({key.T, cfg.c0, cfg.c1});
        auto exact = std::make_shared<ExactScoreField>(target, schedule);

        std::shared_ptr<const ScoreField> field = exact;
        if (key.delta > 0.0 && cfg.perturb_kind != PerturbKind::none) {
            PerturbationSpec pspec;
            pspec.kind = cfg.perturb_kind;
            pspec.delta = key.delta;
            pspec.seed = mix64(cfg.perturb_seed ^ static_cast<std::uint64_t>(key.k));
            field = perturb(exact, pspec);

            AverageErrors errs = average_errors(*exact, *field, target, schedule, cfg.error_n,
                                                mix64(row.seed ^ 0x65727273ULL));
            row.eps_score = errs.eps_score;
            row.eps_jacobi = errs.eps_jacobi;
        } else {
            row.eps_score = 0.0;
            row.eps_jacobi = 0.0;
        }

        TrajectoryBatch batch =
            run_reverse(schedule, target.d, *field, cfg.sample_n, row.seed, cfg.coeff);
        TvEstimate tv = tv_monte_carlo(batch_head(batch, cfg.tv_n), target, schedule);
        row.tv = tv.value;
        row.tv_stderr = tv.stderr_;
        row.n_flagged = batch.n_flagged();
        row.k_hat = batch_k_hat(batch, cfg.dim_n);
        row.status = "ok";
    } catch (const std::exception &e) {
        row.status = sanitize_status(std::string("failed:") + e.what());
    }
    auto t1 = std::chrono::steady_clock::now();
    row.wall_ms =
        static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
    return row;
}

} // namespace

SweepReport run_sweep(const ExperimentConfig &config, const std::string &csv_path) {
    const std::string hash_line =
        "# config_hash=" + fmt_u64(fnv1a64(config.to_map().to_text()));

    // collect completed rows from an interrupted sweep, if any
    std::map<std::string, SweepRow> done;
    std::vector<std::string> done_order;
    {
        std::ifstream in(csv_path);
        if (in) {
            std::string line;
            bool first_comment = true;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                if (line[0] == '#') {
                    if (first_comment && line != hash_line)
                        throw ConfigError("existing sweep file '" + csv_path +
                                          "' was produced by a different config; remove it or "
                                          "change the output path");
                    first_comment = false;
                    continue;
                }
                if (line.rfind("run_id,", 0) == 0) continue;
                SweepRow row;
                if (parse_sweep_row(line, row) && !done.count(row.run_id)) {
                    done.emplace(row.run_id, row);
                    done_order.push_back(row.run_id);
                }
            }
        }
    }

    // rewrite the preserved prefix canonically (drops any partial trailing
    // line), then append new rows as they finish
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write sweep file '" + csv_path + "'");
    out << hash_line << "\n" << sweep_row_header() << "\n";
    for (const auto &id : done_order) out << format_sweep_row(done.at(id)) << "\n";
    out.flush();

    SweepReport report;
    for (const auto &id : done_order) report.rows.push_back(done.at(id));
    for (int k : config.k_list) {
        for (double delta : config.delta_list) {
            for (int T : config.T_list) {
                RunKey key{k, delta, T};
                std::string run_id = make_run_id(config, key);
                if (done.count(run_id)) continue;
                SweepRow row = execute_run(config, key, run_id);
                out << format_sweep_row(row) << "\n";
                out.flush();
                report.rows.push_back(row);
            }
        }
    }
    report.fits = fit_groups(report.rows);
    return report;
}

std::vector<GroupFit> fit_groups(const std::vector<SweepRow> &rows) {
    std::vector<GroupFit> fits;
    std::vector<std::vector<std::pair<double, double>>> points;
    auto group_index = [&](int d, int k, double delta, const std::string &coeff) {
        for (std::size_t i = 0; i < fits.size(); ++i)
            if (fits[i].d == d && fits[i].k == k && fits[i].delta == delta &&
                fits[i].coeff == coeff)
                return i;
        fits.push_back({d, k, delta, coeff, 0, false, {}});
        points.emplace_back();
        return fits.size() - 1;
    };

    for (const auto &row : rows) {
        std::size_t gi = group_index(row.d, row.k_nominal, row.delta, row.coeff);
        if (!row.ok()) continue;
        TvEstimate est;
        est.value = row.tv;
        est.stderr_ = row.tv_stderr;
        if (est.below_resolution()) continue; // noise-dominated point
        double floored = std::max(row.tv, row.tv_stderr);
        if (!(floored > 0.0)) continue;
        points[gi].push_back({static_cast<double>(row.T), floored});
    }
    for (std::size_t i = 0; i < fits.size(); ++i) {
        fits[i].n_points = static_cast<int>(points[i].size());
        std::set<double> distinct;
        for (auto &[T, tv] : points[i]) distinct.insert(T);
        if (distinct.size() >= 3) {
            fits[i].fit = rate_fit(points[i]);
            fits[i].fitted = true;
        }
    }
    return fits;
}

void write_fits_csv(const std::string &path, const std::vector<GroupFit> &fits) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write fits file '" + path + "'");
    out << "d,k,delta,coeff,n_points,slope,intercept,r_squared\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto &g : fits)
        out << g.d << "," << g.k << "," << fmt_g(g.delta) << "," << g.coeff << "," << g.n_points
            << "," << fmt_g(g.fitted ? g.fit.slope : nan) << ","
            << fmt_g(g.fitted ? g.fit.intercept : nan) << ","
            << fmt_g(g.fitted ? g.fit.r_squared : nan) << "\n";
}

SweepReport load_report(const std::string &csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot read sweep file '" + csv_path + "'");
    SweepReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("run_id,", 0) == 0) continue;
        SweepRow row;
        if (parse_sweep_row(line, row)) report.rows.push_back(row);
    }
    report.fits = fit_groups(report.rows);
    return report;
}

// ---- plots -----------------------------------------------------------------

namespace {

const char *kPalette[] = {"#1f6fb2", "#d1495b", "#3e8e5a", "#8d6cab", "#c07d2b", "#4aa8b5"};

std::vector<int> distinct_ks(const std::vector<SweepRow> &rows) {
    std::set<int> ks;
    for (const auto &r : rows)
        if (r.ok()) ks.insert(r.k_nominal);
    return {ks.begin(), ks.end()};
}

} // namespace

void emit_plots(const SweepReport &report, double bound_c, const std::string &out_dir) {
    std::vector<SweepRow> ok_rows;
    for (const auto &r : report.rows)
        if (r.ok()) ok_rows.push_back(r);
    if (ok_rows.empty()) throw std::invalid_argument("empty-report: no successful rows to plot");

    std::vector<int> ks = distinct_ks(ok_rows);

    // --- tv vs T, log-log, one series per k, bound overlay ---
    {
        SvgPlotSpec spec;
        spec.title = "TV vs T";
        spec.x_label = "T (log)";
        spec.y_label = "TV (log)";
        spec.log_x = spec.log_y = true;
        std::set<double> tick_set;
        int ci = 0;
        for (int k : ks) {
            const char *color = kPalette[ci % 6];
            std::vector<std::pair<double, double>> pts;
            int d = 0;
            for (const auto &r : ok_rows)
                if (r.k_nominal == k && r.delta == 0.0) {
                    pts.push_back({static_cast<double>(r.T),
                                   std::max({r.tv, r.tv_stderr, 1e-12})});
                    tick_set.insert(static_cast<double>(r.T));
                    d = r.d;
                }
            if (pts.empty()) continue;
            std::sort(pts.begin(), pts.end());
            spec.series.push_back({pts, color, false, true, "k=" + std::to_string(k)});

            // theorem bound overlay, dashed over vacuous stretches
            std::vector<std::pair<double, double>> seg;
            bool seg_vacuous = false, labeled = false;
            auto flush = [&]() {
                if (!seg.empty()) {
                    std::string label =
                        labeled ? std::string() : "bound k=" + std::to_string(k);
                    labeled = true;
                    spec.series.push_back({seg, color, seg_vacuous, false, label});
                    seg.clear();
                }
            };
            for (const auto &[T, tv] : pts) {
                BoundValue b = theorem_bound(k, d, T, 0.0, 0.0, bound_c);
                if (!seg.empty() && b.vacuous != seg_vacuous) flush();
                if (seg.empty()) seg_vacuous = b.vacuous;
                seg.push_back({T, b.value});
            }
            flush();
            ++ci;
        }
        spec.x_ticks.assign(tick_set.begin(), tick_set.end());
        if (!spec.series.empty())
            write_line_plot(out_dir + "/tv_vs_T.svg", spec);
    }

    // --- tv vs delta at the largest T with several deltas ---
    {
        std::map<int, std::set<double>> deltas_per_T;
        for (const auto &r : ok_rows) deltas_per_T[r.T].insert(r.delta);
        int T_fixed = -1;
        for (const auto &[T, ds] : deltas_per_T)
            if (ds.size() >= 2 && T > T_fixed) T_fixed = T;
        if (T_fixed > 0) {
            SvgPlotSpec spec;
            spec.title = "TV vs perturbation size (T=" + std::to_string(T_fixed) + ")";
            spec.x_label = "delta";
            spec.y_label = "TV";
            int ci = 0;
            for (int k : ks) {
                std::vector<std::pair<double, double>> pts;
                for (const auto &r : ok_rows)
                    if (r.k_nominal == k && r.T == T_fixed) pts.push_back({r.delta, r.tv});
                if (pts.size() < 2) continue;
                std::sort(pts.begin(), pts.end());
                spec.series.push_back(
                    {pts, kPalette[ci++ % 6], false, true, "k=" + std::to_string(k)});
            }
            if (!spec.series.empty()) write_line_plot(out_dir + "/tv_vs_delta.svg", spec);
        }
    }

    // --- measured k_hat against nominal k ---
    if (ks.size() >= 2) {
        SvgPlotSpec spec;
        spec.title = "Estimated vs nominal intrinsic dimension";
        spec.x_label = "nominal k";
        spec.y_label = "estimated k";
        std::vector<std::pair<double, double>> pts;
        for (int k : ks) {
            const SweepRow *best = nullptr;
            for (const auto &r : ok_rows)
                if (r.k_nominal == k && r.delta == 0.0 && std::isfinite(r.k_hat) &&
                    (!best || r.T > best->T))
                    best = &r;
            if (best) pts.push_back({static_cast<double>(k), best->k_hat});
        }
        if (pts.size() >= 2) {
            std::vector<std::pair<double, double>> ref = {pts.front(), pts.back()};
            ref.front().second = ref.front().first;
            ref.back().second = ref.back().first;
            spec.series.push_back({pts, kPalette[0], false, true, "measured"});
            spec.series.push_back({ref, "#888888", true, false, "k = k_hat reference"});
            for (const auto &[x, y] : pts) spec.x_ticks.push_back(x);
            write_line_plot(out_dir + "/khat_vs_k.svg", spec);
        }
    }
}

} // namespace pflab
