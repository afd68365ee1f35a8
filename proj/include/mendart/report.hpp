#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mendart/analysis.hpp"
#include "mendart/effective_solver.hpp"
#include "mendart/exact_solver.hpp"
#include "mendart/oracle.hpp"
#include "mendart/scenario.hpp"

namespace mendart {

using json = nlohmann::ordered_json;

/// Observable history of one engine on the shared output grid.
struct EngineRun {
    Engine engine{Engine::exact};
    std::vector<ObservableRecord> records;
    ode::Stats stats;
};

// ---------------------------------------------------------------------------
// Delimited text
// ---------------------------------------------------------------------------

inline constexpr const char* timeseries_header = "t,gt,mean_n,mean_n2,var_n,p_e,n_sigma_z,n2_sigma_z,trace";

inline void serialize_timeseries(std::span<const ObservableRecord> records, std::ostream& os)
{
    if (records.empty()) {
        throw io_error("refusing to write an empty trajectory");
    }
    os << timeseries_header << '\n';
    for (const auto& r : records) {
        const double row[] = {r.t, r.gt, r.mean_n, r.mean_n2, r.var_n, r.p_e, r.n_sigma_z,
                              r.n2_sigma_z, r.trace};
        for (std::size_t k = 0; k < std::size(row); ++k) {
            os << (k ? "," : "") << format_double(row[k]);
        }
        os << '\n';
    }
}

inline std::vector<ObservableRecord> parse_timeseries(std::istream& in, const std::string& origin = "input")
{
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != timeseries_header) {
        throw io_error(origin + ": missing time-series header");
    }
    std::vector<ObservableRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split_list(line);
        if (cells.size() != 9) {
            throw io_error(origin + ": line " + std::to_string(lineno) + ": expected 9 columns");
        }
        double v[9];
        for (int k = 0; k < 9; ++k) {
            try {
                v[k] = std::stod(cells[static_cast<std::size_t>(k)]);
            } catch (const std::logic_error&) {
                throw io_error(origin + ": line " + std::to_string(lineno) + ": bad number '" +
                               cells[static_cast<std::size_t>(k)] + "'");
            }
        }
        ObservableRecord r;
        r.t = v[0];
        r.gt = v[1];
        r.mean_n = v[2];
        r.mean_n2 = v[3];
        r.var_n = v[4];
        r.p_e = v[5];
        r.n_sigma_z = v[6];
        r.n2_sigma_z = v[7];
        r.trace = v[8];
        out.push_back(std::move(r));
    }
    if (out.empty()) {
        throw io_error(origin + ": no data rows");
    }
    return out;
}

inline std::vector<ObservableRecord> read_timeseries(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot read " + path);
    }
    return parse_timeseries(in, path);
}

/// (n, p_n) pairs for every level with p_n >= floor.
inline void serialize_photon_distribution(const ObservableRecord& r, std::ostream& os,
                                          double floor = 1e-12)
{
    os << "n,p_n\n";
    for (std::size_t n = 0; n < r.photon_dist.size(); ++n) {
        if (r.photon_dist[n] >= floor) {
            os << n << ',' << format_double(r.photon_dist[n]) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Analysis and comparison
// ---------------------------------------------------------------------------

namespace detail {

inline json check(double value, double target, double deviation, double tolerance)
{
    json j;
    j["value"] = value;
    j["target"] = target;
    j["deviation"] = deviation;
    j["tolerance"] = tolerance;
    j["pass"] = std::isfinite(deviation) && deviation < tolerance;
    return j;
}

inline double relative(double value, double target)
{
    return target != 0.0 ? std::abs(value - target) / std::abs(target) : std::abs(value);
}

inline std::size_t first_at_or_after(std::span<const ObservableRecord> r, double gt)
{
    const double slack = 1e-9 * std::max(1.0, std::abs(gt));
    std::size_t i = 0;
    while (i < r.size() && r[i].gt < gt - slack) {
        ++i;
    }
    return i;
}

inline const ObservableRecord* record_at(std::span<const ObservableRecord> r, double gt)
{
    for (const auto& x : r) {
        if (std::abs(x.gt - gt) <= 1e-9 * std::max(1.0, std::abs(gt))) {
            return &x;
        }
    }
    return nullptr;
}

inline void collect_failures(const json& node, const std::string& path, std::vector<std::string>& out)
{
    if (!node.is_object()) {
        return;
    }
    if (node.contains("pass") && node["pass"].is_boolean() && !node["pass"].get<bool>()) {
        if (node.contains("value") || node.contains("max_dev_over_peak") || node.contains("late_max_rel")) {
            out.push_back(path);
        }
    }
    for (const auto& [key, child] : node.items()) {
        collect_failures(child, path.empty() ? key : path + "." + key, out);
    }
}

} // namespace detail

/**
 * Single-engine checks: trace drift, moment-identity residual and, when the
 * run reaches past the tail window, the asymptotic fits.
 */
inline json analyze_engine(const EngineRun& run, const ModelParams& p, const CompareSettings& s)
{
    const auto& r = run.records;
    if (r.empty()) {
        throw comparison_error("engine " + engine_name(run.engine) + " produced no records");
    }
    json j;
    j["points"] = r.size();
    j["steps_accepted"] = run.stats.accepted;
    j["steps_rejected"] = run.stats.rejected;
    j["rhs_evaluations"] = run.stats.rhs_evals;

    double drift = 0.0;
    for (const auto& x : r) {
        drift = std::max(drift, std::abs(x.trace - r.front().trace));
    }
    j["trace_drift"] = detail::check(drift, 0.0, drift, s.trace_tol);

    const double gt_end = r.back().gt;
    if (r.size() >= 2) {
        const auto res = moment_identity_residual(r, p);
        double max_abs = 0.0;
        for (double v : res) {
            max_abs = std::max(max_abs, std::abs(v));
        }
        const std::size_t tail0 = detail::first_at_or_after(r, s.tail_gt);
        double tail_rel = 0.0;
        for (std::size_t i = tail0; i < r.size(); ++i) {
            if (r[i].mean_n > 0.0) {
                tail_rel = std::max(tail_rel, std::abs(res[i]) / r[i].mean_n);
            }
        }
        json id;
        id["max_abs"] = max_abs;
        id["tail_max_rel"] = tail_rel;
        // The identity is exact for the effective dynamics; for the others it
        // only holds once the coherences have relaxed.
        if (run.engine == Engine::effective) {
            id["check"] = detail::check(max_abs, 0.0, max_abs, s.identity_tol);
        } else if (tail0 < r.size()) {
            id["check"] = detail::check(tail_rel, 0.0, tail_rel, s.identity_rel_tol);
        } else {
            id["skipped"] = "run ends before the tail window";
        }
        j["moment_identity"] = id;
    }

    const auto a = asymptotic_predictions(p);
    const std::size_t tail0 = detail::first_at_or_after(r, s.tail_gt);
    const std::size_t count = r.size() - tail0;
    json asym;
    asym["window_gt"] = {s.tail_gt, gt_end};
    if (gt_end <= s.tail_gt || count < 10) {
        asym["skipped"] = "run ends before the tail window holds 10 points";
        j["asymptotics"] = asym;
        return j;
    }
    const std::span<const ObservableRecord> tail(r.data() + tail0, count);
    const auto t = series(tail, &ObservableRecord::t);
    const auto gt = series(tail, &ObservableRecord::gt);
    const auto n = series(tail, &ObservableRecord::mean_n);
    const auto n2 = series(tail, &ObservableRecord::mean_n2);
    const auto pe = series(tail, &ObservableRecord::p_e);
    const auto nsz = series(tail, &ObservableRecord::n_sigma_z);

    const auto slope = fit_linear_slope(t, n, 1.0);
    auto c = detail::check(slope.coefficient, a.slope_n, detail::relative(slope.coefficient, a.slope_n),
                           s.slope_tol);
    c["std_error"] = slope.std_error;
    asym["slope_n"] = c;

    const auto pe_slope = fit_linear_slope(gt, pe, 1.0);
    asym["p_e_slope_per_gt"] =
        detail::check(pe_slope.coefficient, 0.0, std::abs(pe_slope.coefficient), s.constancy_tol);
    const auto nsz_slope = fit_linear_slope(gt, nsz, 1.0);
    asym["n_sigma_z_slope_per_gt"] =
        detail::check(nsz_slope.coefficient, 0.0, std::abs(nsz_slope.coefficient), s.constancy_tol);

    // Pointwise over the window; the reported value is the worst point.
    auto worst = [&](auto value_of, double target, double tol) {
        double dev = -1.0;
        double at = 0.0;
        for (const auto& x : tail) {
            const double v = value_of(x);
            const double d = detail::relative(v, target);
            if (d > dev) {
                dev = d;
                at = v;
            }
        }
        return detail::check(at, target, dev, tol);
    };
    asym["p_e_plus_n_sigma_z"] =
        worst([](const ObservableRecord& x) { return x.p_e + x.n_sigma_z; }, a.limit_pe_plus_nsz,
              s.pe_nsz_tol);
    asym["n2_sigma_z_over_n"] = worst(
        [](const ObservableRecord& x) { return x.mean_n > 0.0 ? x.n2_sigma_z / x.mean_n : 0.0; },
        a.n2sz_ratio, s.ratio_tol);

    const auto quad = fit_quadratic_coeff(t, n2, 1.0);
    c = detail::check(quad.coefficient, a.quadratic_coeff,
                      detail::relative(quad.coefficient, a.quadratic_coeff), s.quadratic_tol);
    c["std_error"] = quad.std_error;
    asym["quadratic_coeff_n2"] = c;
    j["asymptotics"] = asym;
    return j;
}

inline void require_shared_grid(const EngineRun& x, const EngineRun& y)
{
    if (x.records.size() != y.records.size()) {
        throw comparison_error("grid mismatch: " + engine_name(x.engine) + " has " +
                               format_number(x.records.size()) + " points, " +
                               engine_name(y.engine) + " has " + format_number(y.records.size()));
    }
    for (std::size_t i = 0; i < x.records.size(); ++i) {
        const double a = x.records[i].gt;
        const double b = y.records[i].gt;
        if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(a))) {
            throw comparison_error("grid mismatch at point " + format_number(i) + ": gt " +
                                   format_number(a) + " vs " + format_number(b));
        }
    }
}

/// Deviations of `other` relative to `ref` on a shared grid.
inline json compare_pair(const EngineRun& ref, const EngineRun& other, const CompareSettings& s,
                         std::span<const double> snapshots_gt)
{
    require_shared_grid(ref, other);
    struct Field {
        const char* name;
        double ObservableRecord::*member;
    };
    static constexpr Field fields[] = {
        {"mean_n", &ObservableRecord::mean_n},         {"mean_n2", &ObservableRecord::mean_n2},
        {"var_n", &ObservableRecord::var_n},           {"p_e", &ObservableRecord::p_e},
        {"n_sigma_z", &ObservableRecord::n_sigma_z},   {"n2_sigma_z", &ObservableRecord::n2_sigma_z}};

    json j;
    j["reference"] = engine_name(ref.engine);
    j["other"] = engine_name(other.engine);
    json obs;
    for (const auto& f : fields) {
        double max_abs = 0.0;
        double late = 0.0;
        double transient = 0.0;
        for (std::size_t i = 0; i < ref.records.size(); ++i) {
            const double x = ref.records[i].*f.member;
            const double y = other.records[i].*f.member;
            max_abs = std::max(max_abs, std::abs(x - y));
            if (std::abs(x) < 1e-12) {
                continue;
            }
            const double rel = std::abs(x - y) / std::abs(x);
            double& slot = ref.records[i].gt >= s.late_gt ? late : transient;
            slot = std::max(slot, rel);
        }
        json o;
        o["max_abs"] = max_abs;
        o["late_max_rel"] = late;
        o["transient_max_rel"] = transient;
        obs[f.name] = o;
    }
    j["observables"] = obs;

    json agree;
    agree["window_gt_from"] = s.late_gt;
    agree["points"] = ref.records.size() - detail::first_at_or_after(ref.records, s.late_gt);
    agree["tolerance"] = s.agreement_tol;
    bool pass = true;
    for (const char* name : {"mean_n", "mean_n2", "p_e"}) {
        const double v = obs[name]["late_max_rel"].get<double>();
        agree[name] = v;
        pass = pass && v < s.agreement_tol;
    }
    agree["late_max_rel"] = std::max({obs["mean_n"]["late_max_rel"].get<double>(),
                                      obs["mean_n2"]["late_max_rel"].get<double>(),
                                      obs["p_e"]["late_max_rel"].get<double>()});
    if (agree["points"].get<std::size_t>() > 0) {
        agree["pass"] = pass;
    } else {
        agree["skipped"] = "run ends before the late window";
    }
    j["late_window"] = agree;

    json transient;
    transient["mean_n_max_rel"] = obs["mean_n"]["transient_max_rel"];
    transient["threshold"] = s.transient_flag;
    transient["flagged"] = obs["mean_n"]["transient_max_rel"].get<double>() > s.transient_flag;
    j["transient"] = transient;

    json dists = json::array();
    for (double snap : snapshots_gt) {
        const auto* x = detail::record_at(ref.records, snap);
        const auto* y = detail::record_at(other.records, snap);
        if (x == nullptr || y == nullptr || x->photon_dist.empty() || y->photon_dist.empty()) {
            continue;
        }
        const std::size_t levels = std::max(x->photon_dist.size(), y->photon_dist.size());
        double peak = 0.0;
        double dev = 0.0;
        for (std::size_t n = 0; n < levels; ++n) {
            const double px = n < x->photon_dist.size() ? x->photon_dist[n] : 0.0;
            const double py = n < y->photon_dist.size() ? y->photon_dist[n] : 0.0;
            peak = std::max(peak, px);
            dev = std::max(dev, std::abs(px - py));
        }
        json d;
        d["gt"] = snap;
        d["peak"] = peak;
        d["max_dev_over_peak"] = peak > 0.0 ? dev / peak : dev;
        d["tolerance"] = s.distribution_tol;
        d["pass"] = (peak > 0.0 ? dev / peak : dev) < s.distribution_tol;
        dists.push_back(d);
    }
    j["photon_distribution"] = dists;
    return j;
}

inline json params_json(const ModelParams& p)
{
    json j;
    j["omega"] = p.omega();
    j["atom_omega"] = p.atom_omega();
    j["g"] = p.g();
    j["gamma_a"] = p.gamma_a();
    j["gamma_c"] = p.gamma_c();
    return j;
}

inline json analytic_json(const ModelParams& p)
{
    const auto a = asymptotic_predictions(p);
    const auto v = dephasing_rates(p);
    json j;
    j["slope_n"] = a.slope_n;
    j["limit_p_e_plus_n_sigma_z"] = a.limit_pe_plus_nsz;
    j["n2_sigma_z_over_n"] = a.n2sz_ratio;
    j["n2_rate_constant"] = a.n2_rate_constant;
    j["n2_rate_per_n"] = a.n2_rate_per_n;
    j["quadratic_coeff_n2"] = a.quadratic_coeff;
    j["v1"] = v.v1;
    j["v2"] = v.v2;
    return j;
}

inline void finalize_report(json& j)
{
    std::vector<std::string> failures;
    detail::collect_failures(j["engines"], "engines", failures);
    if (j.contains("comparisons")) {
        detail::collect_failures(j["comparisons"], "comparisons", failures);
    }
    j["failed_checks"] = failures;
    j["pass"] = failures.empty();
}

/// Per-engine analysis plus pairwise deviations against the first engine
/// (the exact engine when present). Needs at least two engines on one grid.
inline json comparison_report(std::span<const EngineRun> runs, const ModelParams& p,
                              const CompareSettings& s, std::span<const double> snapshots_gt = {})
{
    if (runs.size() < 2) {
        throw comparison_error("comparison needs at least two engines, got " +
                               format_number(runs.size()));
    }
    std::size_t ref = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].engine == Engine::exact) {
            ref = i;
            break;
        }
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
        require_shared_grid(runs[ref], runs[i]);
    }
    json j;
    j["params"] = params_json(p);
    j["analytic"] = analytic_json(p);
    json engines;
    for (const auto& r : runs) {
        engines[engine_name(r.engine)] = analyze_engine(r, p, s);
    }
    j["engines"] = engines;
    json cmp = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (i != ref) {
            cmp.push_back(compare_pair(runs[ref], runs[i], s, snapshots_gt));
        }
    }
    j["comparisons"] = cmp;
    finalize_report(j);
    return j;
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void rethrow_for(Engine e, const error& err)
{
    const std::string what = "engine " + engine_name(e) + ": " + err.what();
    switch (err.kind()) {
    case error_kind::truncation:
        throw truncation_error(what, static_cast<const truncation_error&>(err).tail_mass());
    case error_kind::solver:
        throw solver_error(what);
    case error_kind::size:
        throw size_error(what);
    case error_kind::domain:
        throw domain_error(what);
    case error_kind::range:
        throw range_error(what);
    case error_kind::config:
        throw config_error(what);
    case error_kind::comparison:
        throw comparison_error(what);
    case error_kind::io:
        throw io_error(what);
    }
    throw solver_error(what);
}

inline EngineRun run_engine(Engine e, const ScenarioConfig& c)
{
    const ModelParams p = c.params();
    const DensityState s0 = initial_state(c);
    const auto grid_gt = output_grid_gt(c);
    std::vector<double> grid(grid_gt.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = grid_gt[i] / p.g();
    }
    const double t_final = c.gt_final / p.g();

    EngineRun run;
    run.engine = e;
    if (e == Engine::exact) {
        ExactOptions opts;
        opts.truncation_threshold = c.truncation_threshold;
        opts.keep_states = false;
        auto traj = integrate_exact(p, s0, t_final, grid, c.exact.tolerances(p.g()), opts);
        run.records = std::move(traj.observables);
        run.stats = traj.stats;
    } else if (e == Engine::effective) {
        EffectiveOptions opts;
        opts.truncation_threshold = c.truncation_threshold;
        opts.keep_states = false;
        auto traj = integrate_effective(p, diagonal_populations(s0), t_final, grid,
                                        c.effective.tolerances(p.g()), opts);
        run.records = std::move(traj.observables);
        run.stats = traj.stats;
    } else {
        OracleLimits limits;
        const long dim = 2L * (c.oracle_n_max_cap + 1);
        limits.max_generator_dim = dim * dim;
        const auto L = build_liouvillian(p, c.n_max, limits);
        PropagationOptions popts;
        popts.max_expm_dim = limits.max_generator_dim;
        const auto states = propagate_oracle_grid(L, s0, grid, popts);
        for (std::size_t i = 0; i < states.size(); ++i) {
            const auto check = check_truncation(states[i], c.truncation_threshold);
            if (!check.pass) {
                throw truncation_error("oracle: top-level Fock population " +
                                           format_number(check.tail) + " exceeds threshold at gt=" +
                                           format_number(grid_gt[i]),
                                       check.tail);
            }
            run.records.push_back(observables(states[i], grid[i], grid_gt[i]));
        }
    }
    return run;
}

inline std::string snapshot_label(double gt)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", gt);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot write " + path.string());
    }
    out << text;
    out.close();
    if (!out) {
        throw io_error("write failed for " + path.string());
    }
}

} // namespace detail

struct ScenarioOutcome {
    std::vector<EngineRun> runs;
    json report;
    std::vector<std::string> files;

    bool pass() const { return report.value("pass", false); }
};

/**
 * Runs every requested engine (concurrently), then writes into
 * config.output_dir:
 *   resolved_config.ini               the full resolved scenario
 *   <engine>_timeseries.csv           one row per output time
 *   <engine>_photon_gt<G>.csv         (n, p_n) at each snapshot time
 *   report.json                       analysis and engine comparison
 * Solver failures are rethrown with the engine name prepended.
 */
inline ScenarioOutcome run_scenario(const ScenarioConfig& config, bool write_files = true)
{
    validate(config);
    const ModelParams p = config.params();

    std::vector<std::future<EngineRun>> jobs;
    for (Engine e : config.engines) {
        jobs.push_back(std::async(std::launch::async, [e, &config] {
            try {
                return detail::run_engine(e, config);
            } catch (const error& err) {
                detail::rethrow_for(e, err);
            }
        }));
    }
    ScenarioOutcome out;
    for (auto& job : jobs) {
        out.runs.push_back(job.get());
    }

    if (out.runs.size() >= 2) {
        out.report = comparison_report(out.runs, p, config.compare, config.snapshots_gt);
    } else {
        out.report["params"] = params_json(p);
        out.report["analytic"] = analytic_json(p);
        out.report["engines"][engine_name(out.runs[0].engine)] =
            analyze_engine(out.runs[0], p, config.compare);
        out.report["comparisons"] = json::array();
        finalize_report(out.report);
    }
    json head;
    head["scenario"] = config.name;
    head["n_max"] = config.n_max;
    head.update(out.report);
    out.report = std::move(head);

    if (!write_files) {
        return out;
    }
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw io_error("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    auto emit = [&](const std::string& name, const std::string& text) {
        detail::write_text(dir / name, text);
        out.files.push_back((dir / name).string());
    };
    emit("resolved_config.ini", serialize_config(config));
    for (const auto& run : out.runs) {
        std::ostringstream ts;
        serialize_timeseries(run.records, ts);
        emit(engine_name(run.engine) + "_timeseries.csv", ts.str());
        for (double snap : config.snapshots_gt) {
            const auto* r = detail::record_at(run.records, snap);
            if (r == nullptr) {
                continue;
            }
            std::ostringstream pd;
            serialize_photon_distribution(*r, pd);
            emit(engine_name(run.engine) + "_photon_gt" + detail::snapshot_label(snap) + ".csv",
                 pd.str());
        }
    }
    emit("report.json", out.report.dump(2) + "\n");
    return out;
}

/// Exit status for the CLI: 0 success, 2 config/input, 3 solver, 4 truncation,
/// 5 comparison failure, 6 I/O.
inline int exit_code(error_kind k)
{
    switch (k) {
    case error_kind::config:
    case error_kind::domain:
    case error_kind::range:
    case error_kind::size:
        return 2;
    case error_kind::solver:
        return 3;
    case error_kind::truncation:
        return 4;
    case error_kind::comparison:
        return 5;
    case error_kind::io:
        return 6;
    }
    return 1;
}

} // namespace mendart
