// Command-line front end: scenario runs, engine comparison, oracle checks.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mendart/mendart.hpp"

namespace {

using namespace mendart;

struct Overrides {
    std::optional<int> n_max;
    std::optional<double> rel_tol;
    std::optional<double> abs_tol;
    std::optional<double> dt_gt;
    std::optional<double> gt_final;
    std::optional<double> gt_step;
    std::vector<double> snapshots;
    std::vector<std::string> engines;
    std::optional<std::string> out;
    bool fixed_step{false};

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--n-max", n_max, "Fock truncation");
        cmd->add_option("--rel-tol", rel_tol, "relative tolerance (exact and effective)");
        cmd->add_option("--abs-tol", abs_tol, "absolute tolerance (exact and effective)");
        cmd->add_flag("--fixed-step", fixed_step, "classical RK4 with a fixed step");
        cmd->add_option("--dt-gt", dt_gt, "fixed step in gt units");
        cmd->add_option("--gt-final", gt_final, "final time in gt units");
        cmd->add_option("--gt-step", gt_step, "output spacing in gt units");
        cmd->add_option("--snapshots", snapshots, "photon-distribution snapshot times (gt)")
            ->delimiter(',');
        cmd->add_option("--engines", engines, "exact,effective,oracle")->delimiter(',');
        cmd->add_option("-o,--out", out, "output directory");
    }

    void apply(ScenarioConfig& c) const
    {
        if (n_max) {
            c.n_max = *n_max;
        }
        for (auto* e : {&c.exact, &c.effective}) {
            if (rel_tol) {
                e->rel_tol = *rel_tol;
            }
            if (abs_tol) {
                e->abs_tol = *abs_tol;
            }
            if (fixed_step) {
                e->fixed_step = true;
            }
            if (dt_gt) {
                e->fixed_dt_gt = *dt_gt;
            }
        }
        if (gt_final) {
            c.gt_final = *gt_final;
            if (snapshots.empty()) {
                c.snapshots_gt = {*gt_final};
            }
        }
        if (gt_step) {
            c.gt_step = *gt_step;
        }
        if (!snapshots.empty()) {
            c.snapshots_gt = snapshots;
        }
        if (!engines.empty()) {
            c.engines.clear();
            for (const auto& e : engines) {
                c.engines.push_back(parse_engine(e));
            }
        }
        if (out) {
            c.output_dir = *out;
        }
        validate(c);
    }
};

struct ParamOptions {
    std::string preset{"fig1"};
    std::optional<double> omega, atom_omega, g, gamma_a, gamma_c;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--preset", preset, "fig1, fig2 or fig3")->capture_default_str();
        cmd->add_option("--omega", omega, "cavity frequency");
        cmd->add_option("--atom-omega", atom_omega, "atomic transition frequency");
        cmd->add_option("--g", g, "coupling");
        cmd->add_option("--gamma-a", gamma_a, "atomic dephasing rate");
        cmd->add_option("--gamma-c", gamma_c, "cavity dephasing rate");
    }

    ScenarioConfig resolve() const
    {
        ScenarioConfig c = mendart::preset(preset);
        c.omega = omega.value_or(c.omega);
        c.atom_omega = atom_omega.value_or(c.atom_omega);
        c.g = g.value_or(c.g);
        c.gamma_a = gamma_a.value_or(c.gamma_a);
        c.gamma_c = gamma_c.value_or(c.gamma_c);
        return c;
    }
};

void print_report_summary(const ScenarioOutcome& out, std::ostream& os)
{
    for (const auto& f : out.files) {
        os << "wrote " << f << "\n";
    }
    const auto& r = out.report;
    for (const auto& [name, eng] : r["engines"].items()) {
        os << name << ": trace drift " << eng["trace_drift"]["value"].get<double>();
        if (eng.contains("asymptotics") && eng["asymptotics"].contains("slope_n")) {
            os << ", <n> slope " << eng["asymptotics"]["slope_n"]["value"].get<double>()
               << " (analytic " << eng["asymptotics"]["slope_n"]["target"].get<double>() << ")";
        }
        os << "\n";
    }
    for (const auto& c : r["comparisons"]) {
        os << c["other"].get<std::string>() << " vs " << c["reference"].get<std::string>() << ": ";
        if (c["late_window"].contains("skipped")) {
            os << "run ends before the late window";
        } else {
            os << "late-window max rel " << c["late_window"]["late_max_rel"].get<double>();
        }
        os << (c["transient"]["flagged"].get<bool>() ? ", transient deviation flagged" : "") << "\n";
    }
    if (out.pass()) {
        os << "all checks passed\n";
    } else {
        os << "failed checks:\n";
        for (const auto& f : r["failed_checks"]) {
            os << "  " << f.get<std::string>() << "\n";
        }
    }
}

int run_and_report(const ScenarioConfig& c)
{
    std::cout << "scenario " << c.name << ": n_max " << c.n_max << ", gt_final " << c.gt_final
              << ", output " << c.output_dir << "\n";
    const auto out = run_scenario(c);
    print_report_summary(out, std::cout);
    return out.pass() ? 0 : 5;
}

int cmd_compare(const std::vector<std::string>& files, const std::vector<std::string>& names,
                const ParamOptions& po, const std::string& out_path)
{
    if (!names.empty() && names.size() != files.size()) {
        throw config_error("--engines must name every input file");
    }
    const ScenarioConfig c = po.resolve();
    std::vector<EngineRun> runs;
    for (std::size_t i = 0; i < files.size(); ++i) {
        std::string name = names.empty() ? std::filesystem::path(files[i]).stem().string() : names[i];
        if (const auto cut = name.find('_'); names.empty() && cut != std::string::npos) {
            name = name.substr(0, cut);
        }
        EngineRun run;
        run.engine = parse_engine(name);
        run.records = read_timeseries(files[i]);
        runs.push_back(std::move(run));
    }
    json report = comparison_report(runs, c.params(), c.compare);
    const std::string text = report.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream os(out_path);
        if (!os || !(os << text)) {
            throw io_error("cannot write " + out_path);
        }
        std::cout << "wrote " << out_path << "\n";
    }
    return report["pass"].get<bool>() ? 0 : 5;
}

int cmd_oracle_check(const ParamOptions& po, int n_max, const std::vector<double>& gts,
                     double tolerance, double rel_tol, const std::string& dump)
{
    const ScenarioConfig c = po.resolve();
    const ModelParams p = c.params();
    const auto L = build_liouvillian(p, n_max);
    if (!dump.empty()) {
        write_liouvillian(dump, L);
        std::cout << "wrote " << dump << "\n";
    }
    const DensityState s0 = fock_atom_state(0, false, n_max);
    std::vector<double> grid;
    for (double gt : gts) {
        grid.push_back(gt / p.g());
    }
    ode::Tolerances tol;
    tol.rel_tol = rel_tol;
    tol.abs_tol = rel_tol * 1e-2;
    ExactOptions opts;
    opts.truncation_threshold = 1.0;
    const auto traj = integrate_exact(p, s0, grid.back(), grid, tol, opts);
    bool pass = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto ref = propagate_oracle(L, s0, grid[i]);
        const auto dev = compare_states(traj.states[i], ref);
        const double min_eig = min_eigenvalue(ref);
        const bool ok = dev.max_abs < tolerance && min_eig >= -1e-8;
        pass = pass && ok;
        std::cout << "gt " << gts[i] << ": max deviation " << dev.max_abs << " (a " << dev.max_a
                  << ", b " << dev.max_b << ", c " << dev.max_c << "), oracle min eigenvalue "
                  << min_eig << (ok ? "  ok" : "  FAIL") << "\n";
    }
    std::cout << (pass ? "oracle check passed\n" : "oracle check failed\n");
    return pass ? 0 : 5;
}

int cmd_asymptotics(const ParamOptions& po)
{
    const auto p = po.resolve().params();
    json j;
    j["params"] = params_json(p);
    j["analytic"] = analytic_json(p);
    std::cout << j.dump(2) << "\n";
    return 0;
}

// Wall time per right-hand-side evaluation of the structured equations versus
// one dense Liouvillian matrix-vector product.
int cmd_bench(const ParamOptions& po, const std::vector<int>& sizes, int repeats)
{
    const auto p = po.resolve().params();
    auto time_us = [repeats](auto&& fn) {
        fn();
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < repeats; ++i) {
            fn();
        }
        const std::chrono::duration<double, std::micro> dt = std::chrono::steady_clock::now() - t0;
        return dt.count() / repeats;
    };
    std::cout << "n_max,structured_coefficients,generator_entries,structured_us,oracle_us\n";
    for (int n : sizes) {
        const DensityState s = thermal_atom_state(0.5, false, n, 1.0);
        const long levels = n + 1;
        const long coefficients = 3 * levels * levels;
        const long gen = (2 * levels) * (2 * levels);
        const detail::ExactRhs rhs(p, n);
        const CVector y = detail::pack(s);
        CVector dy(y.size());
        const double structured = time_us([&] { rhs(y.data(), dy.data()); });
        std::string oracle = "skipped";
        if (gen <= 676L * 676L * 4) {
            OracleLimits limits;
            limits.max_generator_dim = gen;
            const auto L = build_liouvillian(p, n, limits);
            const Eigen::VectorXcd v = to_density_matrix(s).reshaped();
            Eigen::VectorXcd w(v.size());
            oracle = std::to_string(time_us([&] { w.noalias() = L.matrix * v; }));
        }
        std::cout << n << ',' << coefficients << ',' << gen * gen << ',' << structured << ','
                  << oracle << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dephasing-driven photon generation in the Rabi model"};
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "run a scenario from a preset or config file");
    std::string sim_preset;
    std::string sim_config;
    Overrides sim_over;
    simulate->add_option("--preset", sim_preset, "fig1, fig2 or fig3");
    simulate->add_option("-c,--config", sim_config, "scenario file");
    sim_over.attach(simulate);

    auto* figures = app.add_subcommand("figures", "run one of the published scenarios");
    std::string fig_name;
    Overrides fig_over;
    figures->add_option("figure", fig_name, "fig1, fig2 or fig3")->required();
    fig_over.attach(figures);

    auto* compare = app.add_subcommand("compare", "compare engine time series written earlier");
    std::vector<std::string> cmp_files;
    std::vector<std::string> cmp_names;
    std::string cmp_out;
    ParamOptions cmp_params;
    compare->add_option("files", cmp_files, "<engine>_timeseries.csv files")->required()->expected(2, -1);
    compare->add_option("--engines", cmp_names, "engine of each file, in order")->delimiter(',');
    compare->add_option("-o,--out", cmp_out, "report path (default: stdout)");
    cmp_params.attach(compare);

    auto* oracle = app.add_subcommand("oracle-check", "small-n_max equivalence against the dense Liouvillian");
    ParamOptions or_params;
    int or_nmax = 6;
    std::vector<double> or_gts{1.0, 5.0, 10.0};
    double or_tol = 1e-6;
    double or_rel = 1e-10;
    std::string or_dump;
    or_params.attach(oracle);
    oracle->add_option("--n-max", or_nmax, "truncation")->capture_default_str();
    oracle->add_option("--gt", or_gts, "comparison times (gt)")->delimiter(',');
    oracle->add_option("--tolerance", or_tol, "max entrywise deviation")->capture_default_str();
    oracle->add_option("--rel-tol", or_rel, "integrator relative tolerance")->capture_default_str();
    oracle->add_option("--dump-liouvillian", or_dump, "write the generator in binary form");

    auto* asym = app.add_subcommand("asymptotics", "print the analytic long-time constants");
    ParamOptions asym_params;
    asym_params.attach(asym);

    auto* bench = app.add_subcommand("bench", "time structured RHS against dense generator products");
    ParamOptions bench_params;
    std::vector<int> bench_sizes{4, 8, 12, 16, 20};
    int bench_repeats = 200;
    bench_params.attach(bench);
    bench->add_option("--sizes", bench_sizes, "n_max values")->delimiter(',');
    bench->add_option("--repeats", bench_repeats, "evaluations per timing")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            if (sim_preset.empty() == sim_config.empty()) {
                throw config_error("simulate needs exactly one of --preset or --config");
            }
            ScenarioConfig c = sim_config.empty() ? preset(sim_preset) : load_config(sim_config);
            sim_over.apply(c);
            return run_and_report(c);
        }
        if (figures->parsed()) {
            ScenarioConfig c = preset(fig_name);
            fig_over.apply(c);
            return run_and_report(c);
        }
        if (compare->parsed()) {
            return cmd_compare(cmp_files, cmp_names, cmp_params, cmp_out);
        }
        if (oracle->parsed()) {
            return cmd_oracle_check(or_params, or_nmax, or_gts, or_tol, or_rel, or_dump);
        }
        if (asym->parsed()) {
            return cmd_asymptotics(asym_params);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_params, bench_sizes, bench_repeats);
        }
    } catch (const mendart::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
