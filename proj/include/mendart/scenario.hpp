#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mendart/errors.hpp"
#include "mendart/integrator.hpp"
#include "mendart/model.hpp"
#include "mendart/states.hpp"

namespace mendart {

enum class Engine { exact, effective, oracle };

inline std::string engine_name(Engine e)
{
    switch (e) {
    case Engine::exact:
        return "exact";
    case Engine::effective:
        return "effective";
    case Engine::oracle:
        return "oracle";
    }
    return "unknown";
}

inline Engine parse_engine(const std::string& name)
{
    if (name == "exact") {
        return Engine::exact;
    }
    if (name == "effective") {
        return Engine::effective;
    }
    if (name == "oracle") {
        return Engine::oracle;
    }
    throw config_error("unknown engine '" + name + "' (expected exact, effective or oracle)");
}

struct InitialStateSpec {
    enum class Kind { fock, thermal };
    Kind kind{Kind::fock};
    int photons{0};
    double nbar{0.0};
    bool excited{false};
    double tail_tolerance{1e-10};

    friend bool operator==(const InitialStateSpec&, const InitialStateSpec&) = default;
};

/// Integrator settings as written in a scenario; step sizes are in gt units.
struct EngineSettings {
    double rel_tol{1e-8};
    double abs_tol{1e-10};
    bool fixed_step{false};
    double fixed_dt_gt{1e-3};

    ode::Tolerances tolerances(double g) const
    {
        ode::Tolerances tol;
        tol.rel_tol = rel_tol;
        tol.abs_tol = abs_tol;
        tol.fixed_step = fixed_step;
        tol.fixed_dt = fixed_dt_gt / std::abs(g);
        return tol;
    }

    friend bool operator==(const EngineSettings&, const EngineSettings&) = default;
};

/// Thresholds used by the comparison report. Windows are in gt units.
struct CompareSettings {
    double late_gt{50.0};             // engines must agree from here on
    double tail_gt{150.0};            // asymptotic fits use gt >= tail_gt
    double agreement_tol{0.02};       // relative <n>, <n^2>, P_e deviation
    double distribution_tol{0.02};    // pointwise, relative to the peak probability
    double transient_flag{0.02};      // relative <n> deviation that marks a transient
    double slope_tol{0.01};           // linear <n> slope vs analytic rate
    double constancy_tol{1e-6};       // |slope| of P_e and <n sigma_z> per unit gt
    double pe_nsz_tol{0.05};          // P_e + <n sigma_z> vs its limit
    double ratio_tol{0.02};           // <n^2 sigma_z>/<n> vs its limit
    double quadratic_tol{0.10};       // <n^2> t^2 coefficient vs 2 slope^2
    double identity_tol{1e-6};        // effective engine, absolute
    double identity_rel_tol{0.01};    // other engines, relative to <n> in the tail
    double trace_tol{1e-6};           // max |trace(t) - trace(0)|

    friend bool operator==(const CompareSettings&, const CompareSettings&) = default;
};

struct ScenarioConfig {
    std::string name{"custom"};
    double omega{1.0};
    double atom_omega{1.0};
    double g{0.04};
    double gamma_a{0.08};
    double gamma_c{0.0};
    InitialStateSpec initial;
    int n_max{30};
    double gt_final{300.0};
    double gt_step{1.0};
    std::vector<double> snapshots_gt{300.0};
    std::vector<Engine> engines{Engine::exact, Engine::effective};
    EngineSettings exact;
    EngineSettings effective;
    int oracle_n_max_cap{12};
    double truncation_threshold{1e-8};
    CompareSettings compare;
    std::string output_dir{"out"};

    ModelParams params() const { return make_model_params(omega, atom_omega, g, gamma_a, gamma_c); }

    bool has_engine(Engine e) const
    {
        return std::find(engines.begin(), engines.end(), e) != engines.end();
    }

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

inline void validate(const ScenarioConfig& c)
{
    try {
        (void)c.params();
    } catch (const domain_error& e) {
        throw config_error(std::string("model: ") + e.what());
    }
    if (c.g == 0.0) {
        throw config_error("model.g: gt time units need a nonzero coupling");
    }
    if (c.engines.empty()) {
        throw config_error("engines.run: at least one engine is required");
    }
    for (std::size_t i = 0; i < c.engines.size(); ++i) {
        for (std::size_t j = i + 1; j < c.engines.size(); ++j) {
            if (c.engines[i] == c.engines[j]) {
                throw config_error("engines.run: engine '" + engine_name(c.engines[i]) +
                                   "' listed twice");
            }
        }
    }
    if (c.n_max < 1) {
        throw config_error("grid.n_max: must be at least 1");
    }
    if (!(c.gt_final > 0.0)) {
        throw config_error("grid.gt_final: must be positive");
    }
    if (!(c.gt_step > 0.0) || c.gt_step > c.gt_final) {
        throw config_error("grid.gt_step: must lie in (0, gt_final]");
    }
    for (double s : c.snapshots_gt) {
        if (s < 0.0 || s > c.gt_final) {
            throw config_error("grid.snapshots: " + format_number(s) + " outside [0, gt_final]");
        }
    }
    if (c.has_engine(Engine::oracle) && c.n_max > c.oracle_n_max_cap) {
        throw config_error("oracle engine needs n_max <= " + format_number(c.oracle_n_max_cap) +
                           ", got " + format_number(c.n_max));
    }
    if (c.initial.kind == InitialStateSpec::Kind::fock &&
        (c.initial.photons < 0 || c.initial.photons > c.n_max)) {
        throw config_error("initial.photons: outside 0..n_max");
    }
    if (c.initial.kind == InitialStateSpec::Kind::thermal && !(c.initial.nbar >= 0.0)) {
        throw config_error("initial.nbar: must be non-negative");
    }
    for (const auto* s : {&c.exact, &c.effective}) {
        if (!(s->rel_tol > 0.0) || !(s->abs_tol > 0.0)) {
            throw config_error("tolerances must be positive");
        }
        if (s->fixed_step && !(s->fixed_dt_gt > 0.0)) {
            throw config_error("fixed_dt_gt must be positive");
        }
    }
}

inline DensityState initial_state(const ScenarioConfig& c)
{
    if (c.initial.kind == InitialStateSpec::Kind::thermal) {
        return thermal_atom_state(c.initial.nbar, c.initial.excited, c.n_max,
                                  c.initial.tail_tolerance);
    }
    return fock_atom_state(c.initial.photons, c.initial.excited, c.n_max);
}

/// Output times in gt units: the uniform grid 0, step, ..., gt_final merged with
/// the snapshot times.
inline std::vector<double> output_grid_gt(const ScenarioConfig& c)
{
    std::vector<double> grid;
    const auto steps = static_cast<long>(std::floor(c.gt_final / c.gt_step + 1e-9));
    for (long i = 0; i <= steps; ++i) {
        grid.push_back(static_cast<double>(i) * c.gt_step);
    }
    if (std::abs(grid.back() - c.gt_final) > 1e-9 * c.gt_final) {
        grid.push_back(c.gt_final);
    } else {
        grid.back() = c.gt_final;
    }
    for (double s : c.snapshots_gt) {
        grid.push_back(s);
    }
    std::sort(grid.begin(), grid.end());
    std::vector<double> unique;
    for (double t : grid) {
        if (unique.empty() || t - unique.back() > 1e-9 * std::max(1.0, c.gt_final)) {
            unique.push_back(t);
        }
    }
    return unique;
}

// Presets reproduce the three published scenarios: omega = 1, g = 0.04,
// gamma_a = 2 g, gamma_c = 0. Truncations keep the top-two Fock population
// well below the 1e-8 guard up to gt = 300.

inline ScenarioConfig preset_fig1()
{
    ScenarioConfig c;
    c.name = "fig1";
    c.omega = 1.0;
    c.atom_omega = 1.0;
    c.g = 0.04;
    c.gamma_a = 0.08;
    c.gamma_c = 0.0;
    c.initial = {};
    c.n_max = 36;
    c.output_dir = "out/fig1";
    return c;
}

inline ScenarioConfig preset_fig2()
{
    ScenarioConfig c = preset_fig1();
    c.name = "fig2";
    c.atom_omega = c.omega - 20.0 * c.g;
    c.n_max = 46;
    c.output_dir = "out/fig2";
    return c;
}

inline ScenarioConfig preset_fig3()
{
    ScenarioConfig c = preset_fig1();
    c.name = "fig3";
    c.initial.kind = InitialStateSpec::Kind::thermal;
    c.initial.nbar = 0.3;
    c.initial.excited = true;
    c.n_max = 40;
    c.output_dir = "out/fig3";
    return c;
}

inline ScenarioConfig preset(const std::string& name)
{
    if (name == "fig1") {
        return preset_fig1();
    }
    if (name == "fig2") {
        return preset_fig2();
    }
    if (name == "fig3") {
        return preset_fig3();
    }
    throw config_error("unknown preset '" + name + "' (expected fig1, fig2 or fig3)");
}

// ---------------------------------------------------------------------------
// Key/value scenario files
//
//   # comment
//   preset = fig1          (optional, top level: start from a preset)
//   name = my-run
//   [model]   omega, atom_omega, g, gamma_a, gamma_c
//   [initial] kind (fock|thermal), photons, nbar, excited, tail_tolerance
//   [grid]    n_max, gt_final, gt_step, snapshots (comma separated gt values)
//   [engines] run (comma separated: exact, effective, oracle)
//   [exact], [effective]  rel_tol, abs_tol, fixed_step, fixed_dt_gt
//   [oracle]  n_max_cap
//   [guard]   truncation_threshold
//   [compare] late_gt, tail_gt, agreement_tol, distribution_tol, transient_flag,
//             slope_tol, constancy_tol, pe_nsz_tol, ratio_tol, quadratic_tol,
//             identity_tol, identity_rel_tol, trace_tol
//   [output]  dir
// ---------------------------------------------------------------------------

inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

class ConfigReader {
public:
    ConfigReader(int line, std::string field, std::string value)
        : line_(line), field_(std::move(field)), value_(std::move(value))
    {
    }

    [[noreturn]] void fail(const std::string& expected) const
    {
        throw config_error("line " + std::to_string(line_) + ": field '" + field_ + "': expected " +
                           expected + ", got '" + value_ + "'");
    }

    double number() const
    {
        try {
            std::size_t used = 0;
            const double v = std::stod(value_, &used);
            if (used != value_.size() || !std::isfinite(v)) {
                fail("a finite number");
            }
            return v;
        } catch (const std::logic_error&) {
            fail("a finite number");
        }
    }

    int integer() const
    {
        try {
            std::size_t used = 0;
            const long v = std::stol(value_, &used);
            if (used != value_.size()) {
                fail("an integer");
            }
            return static_cast<int>(v);
        } catch (const std::logic_error&) {
            fail("an integer");
        }
    }

    bool boolean() const
    {
        if (value_ == "true" || value_ == "yes" || value_ == "1") {
            return true;
        }
        if (value_ == "false" || value_ == "no" || value_ == "0") {
            return false;
        }
        fail("true or false");
    }

    std::vector<double> numbers() const
    {
        std::vector<double> out;
        for (const auto& item : split_list(value_)) {
            out.push_back(ConfigReader(line_, field_, item).number());
        }
        return out;
    }

    const std::string& text() const { return value_; }
    int line() const { return line_; }

private:
    int line_;
    std::string field_;
    std::string value_;
};

inline void apply_setting(ScenarioConfig& c, const std::string& section, const std::string& key,
                          const ConfigReader& v)
{
    auto engine = [&](EngineSettings& e) {
        if (key == "rel_tol") {
            e.rel_tol = v.number();
        } else if (key == "abs_tol") {
            e.abs_tol = v.number();
        } else if (key == "fixed_step") {
            e.fixed_step = v.boolean();
        } else if (key == "fixed_dt_gt") {
            e.fixed_dt_gt = v.number();
        } else {
            return false;
        }
        return true;
    };
    bool known = true;
    if (section.empty()) {
        if (key == "name") {
            c.name = v.text();
        } else {
            known = false;
        }
    } else if (section == "model") {
        if (key == "omega") {
            c.omega = v.number();
        } else if (key == "atom_omega") {
            c.atom_omega = v.number();
        } else if (key == "g") {
            c.g = v.number();
        } else if (key == "gamma_a") {
            c.gamma_a = v.number();
        } else if (key == "gamma_c") {
            c.gamma_c = v.number();
        } else {
            known = false;
        }
    } else if (section == "initial") {
        if (key == "kind") {
            if (v.text() == "fock") {
                c.initial.kind = InitialStateSpec::Kind::fock;
            } else if (v.text() == "thermal") {
                c.initial.kind = InitialStateSpec::Kind::thermal;
            } else {
                v.fail("fock or thermal");
            }
        } else if (key == "photons") {
            c.initial.photons = v.integer();
        } else if (key == "nbar") {
            c.initial.nbar = v.number();
        } else if (key == "excited") {
            c.initial.excited = v.boolean();
        } else if (key == "tail_tolerance") {
            c.initial.tail_tolerance = v.number();
        } else {
            known = false;
        }
    } else if (section == "grid") {
        if (key == "n_max") {
            c.n_max = v.integer();
        } else if (key == "gt_final") {
            c.gt_final = v.number();
        } else if (key == "gt_step") {
            c.gt_step = v.number();
        } else if (key == "snapshots") {
            c.snapshots_gt = v.numbers();
        } else {
            known = false;
        }
    } else if (section == "engines") {
        if (key == "run") {
            c.engines.clear();
            for (const auto& name : split_list(v.text())) {
                try {
                    c.engines.push_back(parse_engine(name));
                } catch (const config_error&) {
                    v.fail("a list of exact, effective, oracle");
                }
            }
        } else {
            known = false;
        }
    } else if (section == "exact") {
        known = engine(c.exact);
    } else if (section == "effective") {
        known = engine(c.effective);
    } else if (section == "oracle") {
        if (key == "n_max_cap") {
            c.oracle_n_max_cap = v.integer();
        } else {
            known = false;
        }
    } else if (section == "guard") {
        if (key == "truncation_threshold") {
            c.truncation_threshold = v.number();
        } else {
            known = false;
        }
    } else if (section == "compare") {
        auto& s = c.compare;
        double* target = key == "late_gt"            ? &s.late_gt
                         : key == "tail_gt"          ? &s.tail_gt
                         : key == "agreement_tol"    ? &s.agreement_tol
                         : key == "distribution_tol" ? &s.distribution_tol
                         : key == "transient_flag"   ? &s.transient_flag
                         : key == "slope_tol"        ? &s.slope_tol
                         : key == "constancy_tol"    ? &s.constancy_tol
                         : key == "pe_nsz_tol"       ? &s.pe_nsz_tol
                         : key == "ratio_tol"        ? &s.ratio_tol
                         : key == "quadratic_tol"    ? &s.quadratic_tol
                         : key == "identity_tol"     ? &s.identity_tol
                         : key == "identity_rel_tol" ? &s.identity_rel_tol
                         : key == "trace_tol"        ? &s.trace_tol
                                                     : nullptr;
        if (target == nullptr) {
            known = false;
        } else {
            *target = v.number();
        }
    } else if (section == "output") {
        if (key == "dir") {
            c.output_dir = v.text();
        } else {
            known = false;
        }
    } else {
        throw config_error("line " + std::to_string(v.line()) + ": unknown section [" + section +
                           "]");
    }
    if (!known) {
        throw config_error("line " + std::to_string(v.line()) + ": unknown field '" +
                           (section.empty() ? key : section + "." + key) + "'");
    }
}

} // namespace detail

/// Parses a scenario file. A top-level `preset = figN` line (before any
/// section) selects the starting point; otherwise the defaults of ScenarioConfig apply.
inline ScenarioConfig parse_config(const std::string& text)
{
    ScenarioConfig c;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    bool seen_setting = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find_first_of("#;");
        std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) {
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw config_error("line " + std::to_string(line) + ": unterminated section header");
            }
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw config_error("line " + std::to_string(line) + ": expected 'key = value'");
        }
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty()) {
            throw config_error("line " + std::to_string(line) + ": missing key");
        }
        if (section.empty() && key == "preset") {
            if (seen_setting) {
                throw config_error("line " + std::to_string(line) +
                                   ": preset must come before other settings");
            }
            c = preset(value);
            continue;
        }
        seen_setting = true;
        detail::apply_setting(c, section, key,
                              detail::ConfigReader(line, section.empty() ? key : section + "." + key,
                                                   value));
    }
    validate(c);
    return c;
}

inline ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot read scenario file " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string serialize_config(const ScenarioConfig& c)
{
    auto d = format_double;
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    std::ostringstream os;
    os << "# resolved scenario\n";
    os << "name = " << c.name << "\n\n";
    os << "[model]\n"
       << "omega = " << d(c.omega) << "\n"
       << "atom_omega = " << d(c.atom_omega) << "\n"
       << "g = " << d(c.g) << "\n"
       << "gamma_a = " << d(c.gamma_a) << "\n"
       << "gamma_c = " << d(c.gamma_c) << "\n\n";
    os << "[initial]\n"
       << "kind = " << (c.initial.kind == InitialStateSpec::Kind::thermal ? "thermal" : "fock")
       << "\n"
       << "photons = " << c.initial.photons << "\n"
       << "nbar = " << d(c.initial.nbar) << "\n"
       << "excited = " << b(c.initial.excited) << "\n"
       << "tail_tolerance = " << d(c.initial.tail_tolerance) << "\n\n";
    os << "[grid]\n"
       << "n_max = " << c.n_max << "\n"
       << "gt_final = " << d(c.gt_final) << "\n"
       << "gt_step = " << d(c.gt_step) << "\n"
       << "snapshots = ";
    for (std::size_t i = 0; i < c.snapshots_gt.size(); ++i) {
        os << (i ? ", " : "") << d(c.snapshots_gt[i]);
    }
    os << "\n\n[engines]\nrun = ";
    for (std::size_t i = 0; i < c.engines.size(); ++i) {
        os << (i ? ", " : "") << engine_name(c.engines[i]);
    }
    os << "\n\n";
    for (const auto& [label, e] : {std::pair{"exact", &c.exact}, std::pair{"effective", &c.effective}}) {
        os << "[" << label << "]\n"
           << "rel_tol = " << d(e->rel_tol) << "\n"
           << "abs_tol = " << d(e->abs_tol) << "\n"
           << "fixed_step = " << b(e->fixed_step) << "\n"
           << "fixed_dt_gt = " << d(e->fixed_dt_gt) << "\n\n";
    }
    os << "[oracle]\nn_max_cap = " << c.oracle_n_max_cap << "\n\n";
    os << "[guard]\ntruncation_threshold = " << d(c.truncation_threshold) << "\n\n";
    const auto& s = c.compare;
    os << "[compare]\n"
       << "late_gt = " << d(s.late_gt) << "\n"
       << "tail_gt = " << d(s.tail_gt) << "\n"
       << "agreement_tol = " << d(s.agreement_tol) << "\n"
       << "distribution_tol = " << d(s.distribution_tol) << "\n"
       << "transient_flag = " << d(s.transient_flag) << "\n"
       << "slope_tol = " << d(s.slope_tol) << "\n"
       << "constancy_tol = " << d(s.constancy_tol) << "\n"
       << "pe_nsz_tol = " << d(s.pe_nsz_tol) << "\n"
       << "ratio_tol = " << d(s.ratio_tol) << "\n"
       << "quadratic_tol = " << d(s.quadratic_tol) << "\n"
       << "identity_tol = " << d(s.identity_tol) << "\n"
       << "identity_rel_tol = " << d(s.identity_rel_tol) << "\n"
       << "trace_tol = " << d(s.trace_tol) << "\n\n";
    os << "[output]\ndir = " << c.output_dir << "\n";
    return os.str();
}

} // namespace mendart
