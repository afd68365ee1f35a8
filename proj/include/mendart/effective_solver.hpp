#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mendart/errors.hpp"
#include "mendart/exact_solver.hpp"
#include "mendart/integrator.hpp"
#include "mendart/model.hpp"
#include "mendart/observables.hpp"
#include "mendart/states.hpp"

namespace mendart {

struct PopulationTrajectory {
    std::vector<double> times;
    std::vector<double> gt;
    std::vector<PopulationState> states;
    std::vector<ObservableRecord> observables;
    ode::Stats stats;

    std::size_t size() const noexcept { return times.size(); }
};

namespace detail {

// Birth-death ladder: (g,n) <-> (e,n-1) at rate v1 n, (g,n) <-> (e,n+1) at rate v2 (n+1).
// Channels leading above n_max are closed, as eliminating the truncated
// coherence equations gives; probability is conserved exactly.
// Flat layout: ground populations then excited populations.
class EffectiveRhs {
public:
    EffectiveRhs(const ModelParams& params, int n_max)
        : rates_(dephasing_rates(params)), levels_(n_max + 1)
    {
    }

    void operator()(const double* y, double* dy) const
    {
        const double v1 = rates_.v1;
        const double v2 = rates_.v2;
        const int L = levels_;
        const double* a = y;
        const double* b = y + L;
        for (int n = 0; n < L; ++n) {
            const double dn = static_cast<double>(n);
            const double b_below = n > 0 ? b[n - 1] : 0.0;
            const double b_above = n + 1 < L ? b[n + 1] : 0.0;
            const double a_below = n > 0 ? a[n - 1] : 0.0;
            const double a_above = n + 1 < L ? a[n + 1] : 0.0;
            const double up = n + 1 < L ? dn + 1.0 : 0.0;
            dy[n] = -(v1 * dn + v2 * up) * a[n] + v1 * dn * b_below + v2 * up * b_above;
            dy[L + n] = -(v2 * dn + v1 * up) * b[n] + v2 * dn * a_below + v1 * up * a_above;
        }
    }

    void operator()(double /*t*/, const RVector& y, RVector& dy) const
    {
        (*this)(y.data(), dy.data());
    }

private:
    DephasingRates rates_;
    int levels_;
};

inline RVector pack(const PopulationState& p)
{
    RVector y(2 * (p.n_max + 1));
    y << p.a_diag, p.b_diag;
    return y;
}

inline PopulationState unpack_populations(const RVector& y, int n_max)
{
    return {n_max, y.head(n_max + 1), y.tail(n_max + 1)};
}

} // namespace detail

/// Derivative of the diagonal populations under the effective rate equations.
/// Terms referring to photon index -1 or n_max+1 are zero.
inline PopulationState effective_rhs(const ModelParams& params, const PopulationState& pop)
{
    const detail::EffectiveRhs rhs(params, pop.n_max);
    const RVector y = detail::pack(pop);
    RVector dy(y.size());
    rhs(y.data(), dy.data());
    return detail::unpack_populations(dy, pop.n_max);
}

/**
 * Quasi-stationary coherences c(n,m) implied by diagonal populations, obtained
 * by setting dc/dt = 0 with off-diagonal a, b taken as zero. Only the
 * first off-diagonals c(n,n+1) and c(n,n-1) can be nonzero. Where f_{n,m}
 * vanishes (no dephasing, exact resonance) the entry is left at zero.
 */
inline CMatrix adiabatic_coherences(const ModelParams& params, const PopulationState& pop)
{
    const int L = pop.n_max + 1;
    CMatrix c = CMatrix::Zero(L, L);
    auto a = [&](int n) { return n >= 0 && n < L ? pop.a_diag(n) : 0.0; };
    auto b = [&](int n) { return n >= 0 && n < L ? pop.b_diag(n) : 0.0; };
    for (int m = 0; m < L; ++m) {
        for (int n = 0; n < L; ++n) {
            double source = 0.0;
            // sqrt(n+1) b_{n+1,m} - sqrt(m) a_{n,m-1} + sqrt(n) b_{n-1,m} - sqrt(m+1) a_{n,m+1}
            if (m == n + 1) {
                source += std::sqrt(n + 1.0) * b(n + 1) - std::sqrt(static_cast<double>(m)) * a(n);
            }
            if (m == n - 1) {
                source += std::sqrt(static_cast<double>(n)) * b(n - 1) - std::sqrt(m + 1.0) * a(n);
            }
            if (source == 0.0) {
                continue;
            }
            const ComplexRate f = f_coefficient(params, n, m);
            if (std::abs(f) == 0.0) {
                continue;
            }
            c(n, m) = params.g() * source / f;
        }
    }
    return c;
}

struct EffectiveOptions {
    double truncation_threshold{1e-8};
    double negativity_tolerance{1e-9};
    bool keep_states{true};
};

/// Integrates the effective population equations; see integrate_exact for the
/// grid conventions. Negative populations beyond the tolerance are reported
/// as a solver_error rather than clipped.
inline PopulationTrajectory integrate_effective(const ModelParams& params,
                                                const PopulationState& pop0, double t_final,
                                                std::span<const double> output_grid,
                                                const ode::Tolerances& tol = {},
                                                const EffectiveOptions& opts = {})
{
    validate_output_grid(t_final, output_grid);
    const detail::EffectiveRhs rhs(params, pop0.n_max);

    PopulationTrajectory traj;
    traj.times.reserve(output_grid.size());
    traj.gt.reserve(output_grid.size());
    traj.observables.reserve(output_grid.size());

    auto observe = [&](std::size_t, double t, const RVector& y) {
        PopulationState s = detail::unpack_populations(y, pop0.n_max);
        const double gt = params.g() * t;
        const auto check = check_truncation(s.a_diag, s.b_diag, opts.truncation_threshold);
        if (!check.pass) {
            throw truncation_error("effective solver: top-level Fock population " +
                                       format_number(check.tail) + " exceeds threshold at gt=" +
                                       format_number(gt),
                                   check.tail);
        }
        const double min_entry = y.minCoeff();
        if (min_entry < -opts.negativity_tolerance) {
            throw solver_error("effective solver: negative population " +
                               format_number(min_entry) + " at gt=" + format_number(gt));
        }
        traj.times.push_back(t);
        traj.gt.push_back(gt);
        traj.observables.push_back(observables(s, t, gt));
        if (opts.keep_states) {
            traj.states.push_back(std::move(s));
        }
    };
    traj.stats = ode::integrate<RVector>(rhs, detail::pack(pop0), 0.0, output_grid, tol, observe);
    return traj;
}

} // namespace mendart
