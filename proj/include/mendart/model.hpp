#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "mendart/errors.hpp"

namespace mendart {

/// Complex frequency: real part is a frequency, imaginary part a decay rate.
using ComplexRate = std::complex<double>;

struct DephasingRates {
    double v1{0.0};  // rotating channel, (g,n) <-> (e,n-1)
    double v2{0.0};  // anti-rotating channel, (g,n) <-> (e,n+1)
};

/**
 * Physical constants of the dephased Rabi model (hbar = 1).
 *
 * H = omega n + (Omega/2) sigma_z + g (a + a^dag)(sigma_+ + sigma_-),
 * with atomic dephasing gamma_a and cavity dephasing gamma_c.
 * Immutable once built; use make_model_params().
 */
class ModelParams {
public:
    double omega() const noexcept { return omega_; }
    double atom_omega() const noexcept { return atom_omega_; }
    double g() const noexcept { return g_; }
    double gamma_a() const noexcept { return gamma_a_; }
    double gamma_c() const noexcept { return gamma_c_; }
    double gamma() const noexcept { return gamma_a_ + gamma_c_; }

    /// omega^2 + Omega^2 + gamma^2, the denominator of every asymptotic formula.
    double asymptotic_denominator() const noexcept
    {
        return omega_ * omega_ + atom_omega_ * atom_omega_ + gamma() * gamma();
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    friend ModelParams make_model_params(double, double, double, double, double);

    ModelParams(double omega, double atom_omega, double g, double gamma_a, double gamma_c)
        : omega_(omega), atom_omega_(atom_omega), g_(g), gamma_a_(gamma_a), gamma_c_(gamma_c)
    {
    }

    double omega_;
    double atom_omega_;
    double g_;
    double gamma_a_;
    double gamma_c_;
};

inline ModelParams make_model_params(double omega, double atom_omega, double g,
                                     double gamma_a, double gamma_c)
{
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(omega) || !finite(atom_omega) || !finite(g) || !finite(gamma_a) ||
        !finite(gamma_c)) {
        throw domain_error("model parameters must be finite");
    }
    if (omega <= 0.0) {
        throw domain_error("cavity frequency must be positive, got " + format_number(omega));
    }
    if (atom_omega <= 0.0) {
        throw domain_error("atomic frequency must be positive, got " +
                           format_number(atom_omega));
    }
    if (gamma_a < 0.0 || gamma_c < 0.0) {
        throw domain_error("dephasing rates must be non-negative");
    }
    return ModelParams(omega, atom_omega, g, gamma_a, gamma_c);
}

/// Effective transition rates obtained after eliminating the coherences.
inline DephasingRates dephasing_rates(const ModelParams& p)
{
    const double gamma = p.gamma();
    const double numerator = 2.0 * gamma * p.g() * p.g();
    if (numerator == 0.0) {
        // Covers gamma = 0 with omega = Omega, where the denominator also vanishes.
        return {0.0, 0.0};
    }
    const double detuning = p.omega() - p.atom_omega();
    const double sum = p.omega() + p.atom_omega();
    return {numerator / (detuning * detuning + gamma * gamma),
            numerator / (sum * sum + gamma * gamma)};
}

/// f_{n,m} = omega (m - n) + Omega + i [gamma_a + gamma_c (n - m)^2]
inline ComplexRate f_coefficient(const ModelParams& p, int n, int m)
{
    const double diff = static_cast<double>(m - n);
    return {p.omega() * diff + p.atom_omega(), p.gamma_a() + p.gamma_c() * diff * diff};
}

} // namespace mendart
