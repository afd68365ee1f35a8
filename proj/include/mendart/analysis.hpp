#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mendart/errors.hpp"
#include "mendart/model.hpp"
#include "mendart/observables.hpp"

namespace mendart {

/// Closed-form long-time behaviour of the low-order moments.
struct AsymptoticSet {
    double slope_n{0.0};            // d<n>/dt
    double limit_pe_plus_nsz{0.0};  // P_e + <n sigma_z>
    double n2sz_ratio{0.0};         // <n^2 sigma_z> / <n>
    double n2_rate_constant{0.0};   // d<n^2>/dt = constant + per_n * <n>
    double n2_rate_per_n{0.0};
    double quadratic_coeff{0.0};    // <n^2> ~ quadratic_coeff * t^2
};

inline AsymptoticSet asymptotic_predictions(const ModelParams& p)
{
    const double denom = p.asymptotic_denominator();
    const double wW = p.omega() * p.atom_omega();
    AsymptoticSet a;
    a.slope_n = 2.0 * p.gamma() * p.g() * p.g() / denom;
    a.limit_pe_plus_nsz = 0.5 - wW / denom;
    a.n2sz_ratio = -2.0 * wW / denom;
    a.n2_rate_constant = a.slope_n;
    a.n2_rate_per_n = 4.0 * a.slope_n;
    a.quadratic_coeff = 2.0 * a.slope_n * a.slope_n;
    return a;
}

template <class Field>
std::vector<double> series(std::span<const ObservableRecord> records, Field field)
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(r.*field);
    }
    return out;
}

/**
 * <n(t)> - <n(0)> - (2 / (omega^2 + Omega^2 + gamma^2)) (g^2 gamma t - omega Omega [P_e(t) - P_e(0)])
 * at every record. Exact for the effective dynamics.
 */
inline std::vector<double> moment_identity_residual(std::span<const ObservableRecord> records,
                                                    const ModelParams& p)
{
    if (records.size() < 2) {
        throw comparison_error("moment identity needs at least two output times");
    }
    const double denom = p.asymptotic_denominator();
    const double pump = p.g() * p.g() * p.gamma();
    const double wW = p.omega() * p.atom_omega();
    const auto& first = records.front();
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const double rhs = (2.0 / denom) * (pump * (r.t - first.t) - wW * (r.p_e - first.p_e));
        out.push_back((r.mean_n - first.mean_n) - rhs);
    }
    return out;
}

/// Residuals of the four low-order moment equations, sampled at interior grid points.
struct MomentOdeResiduals {
    std::vector<double> times;
    std::vector<double> mean_n;
    std::vector<double> p_e;
    std::vector<double> n_sigma_z;
    std::vector<double> mean_n2;
    double max_fd_error{0.0};  // Richardson estimate of the finite-difference error
    bool grid_too_coarse{false};

    double max_abs(const std::vector<double>& v) const
    {
        double m = 0.0;
        for (double x : v) {
            m = std::max(m, std::abs(x));
        }
        return m;
    }
};

struct MomentRates {
    double mean_n{0.0};
    double p_e{0.0};
    double n_sigma_z{0.0};
    double mean_n2{0.0};
};

/// Right-hand sides of the moment equations implied by the effective rates.
inline MomentRates moment_rates(const ModelParams& p, const ObservableRecord& r)
{
    const auto v = dephasing_rates(p);
    const double x = r.p_e + r.n_sigma_z;
    MomentRates m;
    m.mean_n = v.v2 + (v.v1 - v.v2) * x;
    m.p_e = v.v2 - (v.v1 + v.v2) * x;
    m.n_sigma_z = v.v2 - 2.0 * (v.v1 - v.v2) * r.mean_n - (v.v1 + v.v2) * (x + 2.0 * r.n2_sigma_z);
    m.mean_n2 = (2.0 / p.asymptotic_denominator()) *
                (p.gamma() * p.g() * p.g() * (1.0 + 4.0 * r.mean_n) -
                 p.omega() * p.atom_omega() * m.n_sigma_z);
    return m;
}

namespace detail {

// Three-point derivative at x[i] from samples at i-s, i, i+s on a possibly non-uniform grid.
inline double central_difference(const std::vector<double>& t, const std::vector<double>& y,
                                 std::size_t i, std::size_t s)
{
    const double h1 = t[i] - t[i - s];
    const double h2 = t[i + s] - t[i];
    return -h2 / (h1 * (h1 + h2)) * y[i - s] + (h2 - h1) / (h1 * h2) * y[i] +
           h1 / (h2 * (h1 + h2)) * y[i + s];
}

} // namespace detail

/**
 * Compares centred finite-difference derivatives of the measured moments with
 * the moment equations evaluated from the same records. The d<n^2>/dt
 * equation uses the model value of d<n sigma_z>/dt.
 *
 * grid_too_coarse is set when the Richardson error estimate of any derivative
 * exceeds warn_fraction times that derivative's largest magnitude.
 */
inline MomentOdeResiduals moment_ode_residuals(std::span<const ObservableRecord> records,
                                               const ModelParams& p, double warn_fraction = 0.05)
{
    if (records.size() < 3) {
        throw comparison_error("moment equation residuals need at least three output times");
    }
    const auto t = series(records, &ObservableRecord::t);
    const std::vector<std::vector<double>> measured = {
        series(records, &ObservableRecord::mean_n), series(records, &ObservableRecord::p_e),
        series(records, &ObservableRecord::n_sigma_z), series(records, &ObservableRecord::mean_n2)};

    MomentOdeResiduals out;
    std::vector<std::vector<double>*> targets = {&out.mean_n, &out.p_e, &out.n_sigma_z, &out.mean_n2};
    std::vector<double> fd_error(4, 0.0);
    std::vector<double> scale(4, 0.0);

    for (std::size_t i = 1; i + 1 < records.size(); ++i) {
        const auto model = moment_rates(p, records[i]);
        const double predicted[4] = {model.mean_n, model.p_e, model.n_sigma_z, model.mean_n2};
        out.times.push_back(t[i]);
        for (std::size_t k = 0; k < 4; ++k) {
            const double narrow = detail::central_difference(t, measured[k], i, 1);
            targets[k]->push_back(narrow - predicted[k]);
            scale[k] = std::max(scale[k], std::abs(narrow));
            if (i >= 2 && i + 2 < records.size()) {
                const double wide = detail::central_difference(t, measured[k], i, 2);
                fd_error[k] = std::max(fd_error[k], std::abs(wide - narrow) / 3.0);
            }
        }
    }
    for (std::size_t k = 0; k < 4; ++k) {
        out.max_fd_error = std::max(out.max_fd_error, fd_error[k]);
        if (scale[k] > 0.0 && fd_error[k] > warn_fraction * scale[k]) {
            out.grid_too_coarse = true;
        }
    }
    return out;
}

struct FitResult {
    double coefficient{0.0};
    double std_error{0.0};
    std::size_t points{0};
};

namespace detail {

inline std::pair<std::size_t, std::size_t> tail_window(std::span<const double> t, double window)
{
    if (t.empty()) {
        return {0, 0};
    }
    if (!(window > 0.0) || window > 1.0) {
        throw comparison_error("fit window must be a fraction in (0, 1]");
    }
    const double start = t.back() - window * (t.back() - t.front());
    const double slack = 1e-12 * std::max(1.0, std::abs(t.back()));
    std::size_t first = 0;
    while (first < t.size() && t[first] < start - slack) {
        ++first;
    }
    return {first, t.size()};
}

inline FitResult polynomial_fit(std::span<const double> t, std::span<const double> y,
                                double window, int degree)
{
    if (t.size() != y.size()) {
        throw comparison_error("fit: time and value series differ in length");
    }
    const auto [first, last] = tail_window(t, window);
    const std::size_t count = last - first;
    if (count < 10) {
        throw comparison_error("fit: need at least 10 points in the window, got " +
                               format_number(count));
    }
    double lo = t[first];
    double hi = t[last - 1];
    const double centre = 0.5 * (lo + hi);
    const double half = hi > lo ? 0.5 * (hi - lo) : 1.0;

    Eigen::MatrixXd design(count, degree + 1);
    Eigen::VectorXd rhs(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = (t[first + i] - centre) / half;
        double power = 1.0;
        for (int k = 0; k <= degree; ++k) {
            design(i, k) = power;
            power *= u;
        }
        rhs(i) = y[first + i];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::VectorXd coef = qr.solve(rhs);
    const Eigen::VectorXd resid = rhs - design * coef;
    const double dof = static_cast<double>(count) - (degree + 1);
    const double sigma2 = resid.squaredNorm() / dof;
    const Eigen::MatrixXd normal = design.transpose() * design;
    const Eigen::MatrixXd cov = sigma2 * normal.inverse();

    const double unscale = std::pow(half, degree);
    return {coef(degree) / unscale, std::sqrt(std::max(0.0, cov(degree, degree))) / unscale, count};
}

} // namespace detail

/// Least-squares slope over the final `window` fraction of the time span.
inline FitResult fit_linear_slope(std::span<const double> t, std::span<const double> y,
                                  double window = 0.5)
{
    return detail::polynomial_fit(t, y, window, 1);
}

/// Leading (t^2) coefficient of a least-squares parabola over the final window.
inline FitResult fit_quadratic_coeff(std::span<const double> t, std::span<const double> y,
                                     double window = 0.5)
{
    return detail::polynomial_fit(t, y, window, 2);
}

} // namespace mendart
