#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Core>

#include "mendart/errors.hpp"

namespace mendart::ode {

struct Tolerances {
    double rel_tol{1e-8};
    double abs_tol{1e-10};
    double initial_step{0.0};  // 0 selects the step automatically
    double min_step{1e-12};
    double max_step{0.0};      // 0 means unbounded
    std::size_t max_steps{50'000'000};
    bool fixed_step{false};    // classic RK4, deterministic
    double fixed_dt{1e-2};

    friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct Stats {
    std::size_t accepted{0};
    std::size_t rejected{0};
    std::size_t rhs_evals{0};
};

namespace detail {

// Complex vectors are viewed as interleaved real arrays, so real and imaginary
// parts are weighted as independent components.
template <class Vec>
Eigen::Map<const Eigen::ArrayXd> real_view(const Vec& v)
{
    using Scalar = typename Vec::Scalar;
    constexpr Eigen::Index parts = sizeof(Scalar) / sizeof(double);
    static_assert(parts == 1 || parts == 2, "real or complex<double> vectors only");
    return {reinterpret_cast<const double*>(v.data()), v.size() * parts};
}

template <class Vec>
double scaled_rms(const Vec& v, const Vec& y0, const Vec& y1, const Tolerances& tol)
{
    if (v.size() == 0) {
        return 0.0;
    }
    const auto err = real_view(v);
    const auto scale = tol.abs_tol + tol.rel_tol * real_view(y0).abs().max(real_view(y1).abs());
    return std::sqrt((err / scale).square().mean());
}

inline void check_grid(std::span<const double> grid, double t0)
{
    if (grid.empty()) {
        throw solver_error("output grid is empty");
    }
    if (grid.front() < t0) {
        throw solver_error("output grid starts before the initial time");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw solver_error("output grid must be strictly increasing");
        }
    }
}

// Dormand-Prince 5(4) tableau, with the dense-output weights of Hairer's DOPRI5.
struct dopri {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0,
                            d7 = 69997945.0 / 29380423.0;
};

} // namespace detail

/**
 * Integrate y' = rhs(t, y) from t0 across a strictly increasing output grid.
 *
 * rhs is called as rhs(t, y, dydt); observe(i, t, y) receives the state at
 * grid[i]. The adaptive path runs one continuous Dormand-Prince 5(4)
 * integration over the whole span and samples the grid with the 4th-order
 * continuous extension. With tol.fixed_step the classic RK4 scheme is used
 * and every grid point is hit exactly.
 */
template <class Vec, class Rhs, class Observer>
Stats integrate(Rhs&& rhs, Vec y, double t0, std::span<const double> grid,
                const Tolerances& tol, Observer&& observe)
{
    detail::check_grid(grid, t0);
    Stats stats;
    std::size_t next = 0;
    while (next < grid.size() && grid[next] == t0) {
        observe(next, t0, y);
        ++next;
    }
    if (next == grid.size()) {
        return stats;
    }

    const Eigen::Index dim = y.size();
    Vec k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), ytmp(dim), ynew(dim);

    if (tol.fixed_step) {
        if (!(tol.fixed_dt > 0.0)) {
            throw solver_error("fixed step size must be positive");
        }
        double t = t0;
        for (; next < grid.size(); ++next) {
            const double span = grid[next] - t;
            const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / tol.fixed_dt - 1e-9)));
            const double h = span / static_cast<double>(steps);
            for (std::size_t s = 0; s < steps; ++s) {
                const double ts = t + static_cast<double>(s) * h;
                rhs(ts, y, k1);
                ytmp = y + (0.5 * h) * k1;
                rhs(ts + 0.5 * h, ytmp, k2);
                ytmp = y + (0.5 * h) * k2;
                rhs(ts + 0.5 * h, ytmp, k3);
                ytmp = y + h * k3;
                rhs(ts + h, ytmp, k4);
                y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                stats.rhs_evals += 4;
                ++stats.accepted;
            }
            t = grid[next];
            observe(next, t, y);
        }
        return stats;
    }

    using D = detail::dopri;
    const double t_end = grid.back();
    double t = t0;
    rhs(t, y, k1);
    ++stats.rhs_evals;

    double h = tol.initial_step;
    if (h <= 0.0) {
        // Starting step heuristic from Hairer, Norsett & Wanner.
        const double d0 = detail::scaled_rms(y, y, y, tol);
        const double d1 = detail::scaled_rms(k1, y, y, tol);
        double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, t_end - t0);
        ytmp = y + h0 * k1;
        rhs(t + h0, ytmp, k2);
        ++stats.rhs_evals;
        const double d2 = detail::scaled_rms(Vec(k2 - k1), y, y, tol) / h0;
        const double dmax = std::max(d1, d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        h = std::min(100.0 * h0, h1);
    }
    if (tol.max_step > 0.0) {
        h = std::min(h, tol.max_step);
    }

    bool last_rejected = false;
    while (next < grid.size()) {
        if (stats.accepted + stats.rejected >= tol.max_steps) {
            throw solver_error("integrator exceeded the maximum number of steps");
        }
        const double remaining = t_end - t;
        if (h >= remaining || remaining - h < 1e-12 * std::max(1.0, std::abs(t_end))) {
            h = remaining;
        }
        if (h < tol.min_step && h < remaining) {
            throw solver_error("step size underflow at t=" + format_number(t) +
                               " (h=" + format_number(h) + ")");
        }

        ytmp = y + h * (D::a21 * k1);
        rhs(t + D::c2 * h, ytmp, k2);
        ytmp = y + h * (D::a31 * k1 + D::a32 * k2);
        rhs(t + D::c3 * h, ytmp, k3);
        ytmp = y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3);
        rhs(t + D::c4 * h, ytmp, k4);
        ytmp = y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4);
        rhs(t + D::c5 * h, ytmp, k5);
        ytmp = y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = y + h * (D::a71 * k1 + D::a73 * k3 + D::a74 * k4 + D::a75 * k5 + D::a76 * k6);
        rhs(t + h, ynew, k7);
        stats.rhs_evals += 6;

        ytmp = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);
        const double err = detail::scaled_rms(ytmp, y, ynew, tol);
        if (!std::isfinite(err)) {
            throw solver_error("non-finite error estimate at t=" + format_number(t));
        }

        if (err <= 1.0) {
            const double t_new = (h == remaining) ? t_end : t + h;
            if (next < grid.size() && grid[next] <= t_new) {
                const Vec ydiff = ynew - y;
                const Vec bspl = h * k1 - ydiff;
                const Vec r4 = ydiff - h * k7 - bspl;
                const Vec r5 = h * (D::d1 * k1 + D::d3 * k3 + D::d4 * k4 + D::d5 * k5 +
                                    D::d6 * k6 + D::d7 * k7);
                while (next < grid.size() && grid[next] <= t_new) {
                    if (grid[next] == t_new) {
                        observe(next, t_new, ynew);
                    } else {
                        const double theta = (grid[next] - t) / h;
                        const double theta1 = 1.0 - theta;
                        ytmp = y + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
                        observe(next, grid[next], ytmp);
                    }
                    ++next;
                }
            }
            t = t_new;
            y.swap(ynew);
            k1.swap(k7);
            ++stats.accepted;

            double fac = err == 0.0 ? 10.0 : 0.9 * std::pow(err, -0.2);
            fac = std::clamp(fac, 0.2, 10.0);
            if (last_rejected) {
                fac = std::min(fac, 1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            ++stats.rejected;
            last_rejected = true;
        }
        if (tol.max_step > 0.0) {
            h = std::min(h, tol.max_step);
        }
    }
    return stats;
}

} // namespace mendart::ode
