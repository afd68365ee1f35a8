#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "mendart/errors.hpp"

namespace mendart {

using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/**
 * Truncated atom-field density matrix in block form.
 *
 *   a(n,m) = <g,n|rho|g,m>
 *   b(n,m) = <e,n|rho|e,m>
 *   c(n,m) = <g,n|rho|e,m>     (the e-g block is conj(c(m,n)))
 *
 * Photon indices run over 0..n_max inclusive.
 */
struct DensityState {
    int n_max{0};
    CMatrix a;
    CMatrix b;
    CMatrix c;

    static DensityState zero(int n_max)
    {
        if (n_max < 0) {
            throw range_error("Fock truncation must be non-negative");
        }
        const Eigen::Index size = n_max + 1;
        return {n_max, CMatrix::Zero(size, size), CMatrix::Zero(size, size),
                CMatrix::Zero(size, size)};
    }

    Eigen::Index levels() const noexcept { return n_max + 1; }

    double trace() const { return a.diagonal().real().sum() + b.diagonal().real().sum(); }
};

/// Diagonal populations tracked by the effective rate equations.
struct PopulationState {
    int n_max{0};
    RVector a_diag;
    RVector b_diag;

    static PopulationState zero(int n_max)
    {
        if (n_max < 0) {
            throw range_error("Fock truncation must be non-negative");
        }
        return {n_max, RVector::Zero(n_max + 1), RVector::Zero(n_max + 1)};
    }

    double sum() const { return a_diag.sum() + b_diag.sum(); }
};

struct StateDiagnostics {
    double trace_deviation{0.0};
    double hermiticity_a{0.0};
    double hermiticity_b{0.0};
    double min_diagonal{0.0};
    double max_diagonal_imag{0.0};

    bool ok(double tol) const
    {
        return trace_deviation <= tol && hermiticity_a <= tol && hermiticity_b <= tol &&
               min_diagonal >= -tol && max_diagonal_imag <= tol;
    }
};

inline StateDiagnostics diagnose(const DensityState& s)
{
    StateDiagnostics d;
    d.trace_deviation = std::abs(s.trace() - 1.0);
    d.hermiticity_a = (s.a - s.a.adjoint()).cwiseAbs().maxCoeff();
    d.hermiticity_b = (s.b - s.b.adjoint()).cwiseAbs().maxCoeff();
    d.min_diagonal = std::min(s.a.diagonal().real().minCoeff(), s.b.diagonal().real().minCoeff());
    d.max_diagonal_imag = std::max(s.a.diagonal().imag().cwiseAbs().maxCoeff(),
                                   s.b.diagonal().imag().cwiseAbs().maxCoeff());
    return d;
}

inline DensityState fock_atom_state(int n_photons, bool atom_excited, int n_max)
{
    if (n_photons < 0 || n_photons > n_max) {
        throw range_error("photon number " + format_number(n_photons) +
                          " outside truncation 0.." + format_number(n_max));
    }
    auto s = DensityState::zero(n_max);
    (atom_excited ? s.b : s.a)(n_photons, n_photons) = 1.0;
    return s;
}

/// Probability mass of a thermal distribution above n_max: (nbar/(nbar+1))^(n_max+1).
inline double thermal_tail_mass(double nbar, int n_max)
{
    if (nbar == 0.0) {
        return 0.0;
    }
    const double ratio = nbar / (nbar + 1.0);
    return std::pow(ratio, n_max + 1);
}

/// Thermal field p_n = nbar^n / (nbar+1)^(n+1), renormalised over 0..n_max,
/// tensored with a pure atomic projector.
inline DensityState thermal_atom_state(double nbar, bool atom_excited, int n_max,
                                       double tail_tolerance = 1e-10)
{
    if (!(nbar >= 0.0) || !std::isfinite(nbar)) {
        throw domain_error("mean thermal photon number must be finite and non-negative");
    }
    auto s = DensityState::zero(n_max);
    const double tail = thermal_tail_mass(nbar, n_max);
    if (tail > tail_tolerance) {
        throw truncation_error("thermal tail mass " + format_number(tail) +
                                   " above n_max=" + format_number(n_max) +
                                   " exceeds tolerance",
                               tail);
    }
    const double ratio = nbar / (nbar + 1.0);
    RVector weights(n_max + 1);
    double w = 1.0 / (nbar + 1.0);
    for (int n = 0; n <= n_max; ++n) {
        weights(n) = w;
        w *= ratio;
    }
    weights /= weights.sum();
    CMatrix& block = atom_excited ? s.b : s.a;
    for (int n = 0; n <= n_max; ++n) {
        block(n, n) = weights(n);
    }
    return s;
}

inline PopulationState diagonal_populations(const DensityState& s)
{
    return {s.n_max, s.a.diagonal().real(), s.b.diagonal().real()};
}

} // namespace mendart
