#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mendart/errors.hpp"
#include "mendart/integrator.hpp"
#include "mendart/model.hpp"
#include "mendart/observables.hpp"
#include "mendart/states.hpp"

namespace mendart {

using CVector = Eigen::VectorXcd;

struct Trajectory {
    std::vector<double> times;
    std::vector<double> gt;
    std::vector<DensityState> states;
    std::vector<ObservableRecord> observables;
    ode::Stats stats;

    std::size_t size() const noexcept { return times.size(); }
};

struct TruncationCheck {
    bool pass{true};
    double tail{0.0};  // population on the two highest Fock levels
};

/// Population held by the top two Fock levels; fails above threshold.
inline TruncationCheck check_truncation(const RVector& ground, const RVector& excited,
                                        double threshold = 1e-8)
{
    const Eigen::Index levels = ground.size();
    const Eigen::Index first = std::max<Eigen::Index>(0, levels - 2);
    double tail = 0.0;
    for (Eigen::Index n = first; n < levels; ++n) {
        tail += ground(n) + excited(n);
    }
    return {tail <= threshold, tail};
}

inline TruncationCheck check_truncation(const DensityState& s, double threshold = 1e-8)
{
    return check_truncation(s.a.diagonal().real(), s.b.diagonal().real(), threshold);
}

namespace detail {

/// Flat storage: a, b, c blocks back to back, each column-major (levels x levels).
inline CVector pack(const DensityState& s)
{
    const Eigen::Index block = s.levels() * s.levels();
    CVector y(3 * block);
    y.segment(0, block) = s.a.reshaped();
    y.segment(block, block) = s.b.reshaped();
    y.segment(2 * block, block) = s.c.reshaped();
    return y;
}

inline DensityState unpack(const CVector& y, int n_max)
{
    const Eigen::Index levels = n_max + 1;
    const Eigen::Index block = levels * levels;
    DensityState s{n_max, y.segment(0, block).reshaped(levels, levels),
                   y.segment(block, block).reshaped(levels, levels),
                   y.segment(2 * block, block).reshaped(levels, levels)};
    return s;
}

/// Coefficient equations of the dephased Rabi master equation in block form.
///
/// With X = a + a^dag truncated to 0..n_max (so entries beyond n_max vanish),
///   da/dt = D o a + i g (c X - X c^dag)
///   db/dt = D o b + i g (c^dag X - X c)
///   dc/dt = (i F) o c + i g (a X - X b)
/// where D(n,m) = i omega (m-n) - gamma_c (n-m)^2, F(n,m) = f_{n,m} and o is
/// the entrywise product. X is tridiagonal, so every product is a pair of
/// shifted, sqrt-weighted neighbours; the kernel below works on interleaved
/// real/imaginary doubles so that it vectorises without fast-math flags.
class ExactRhs {
public:
    ExactRhs(const ModelParams& params, int n_max)
        : g_(params.g()), levels_(n_max + 1), sqrt_(n_max + 2), phase_(levels_ * levels_),
          coherence_(levels_ * levels_), padded_(3 * (levels_ + 2) * levels_),
          zeros_(levels_ + 2)
    {
        for (int k = 0; k <= n_max + 1; ++k) {
            sqrt_[k] = std::sqrt(static_cast<double>(k));
        }
        const std::complex<double> i1(0.0, 1.0);
        for (int m = 0; m < levels_; ++m) {
            for (int n = 0; n < levels_; ++n) {
                const double d = static_cast<double>(m - n);
                phase_[n + m * levels_] = {-params.gamma_c() * d * d, params.omega() * d};
                coherence_[n + m * levels_] = i1 * f_coefficient(params, n, m);
            }
        }
    }

    void operator()(const std::complex<double>* y, std::complex<double>* dy) const
    {
        using cd = std::complex<double>;
        const int L = levels_;
        const std::ptrdiff_t block = static_cast<std::ptrdiff_t>(L) * L;
        const cd* a = y;
        const cd* b = y + block;
        const cd* c = y + 2 * block;

        // Zero-padded copies (one extra row above and below) for row shifts.
        const std::ptrdiff_t padded_block = static_cast<std::ptrdiff_t>(L + 2) * L;
        cd* c_pad = padded_.data();
        cd* cadj_pad = c_pad + padded_block;
        cd* b_pad = cadj_pad + padded_block;
        for (int m = 0; m < L; ++m) {
            const std::ptrdiff_t col = static_cast<std::ptrdiff_t>(m) * (L + 2);
            for (int n = 0; n < L; ++n) {
                c_pad[col + n + 1] = c[n + m * L];
                cadj_pad[col + n + 1] = std::conj(c[m + n * L]);
                b_pad[col + n + 1] = b[n + m * L];
            }
        }

        apply(phase_.data(), a, c_pad + 1, cadj_pad, dy);
        apply(phase_.data(), b, cadj_pad + 1, c_pad, dy + block);
        apply_unpadded_columns(coherence_.data(), c, a, b_pad, dy + 2 * block);
    }

    void operator()(double /*t*/, const CVector& y, CVector& dy) const
    {
        (*this)(y.data(), dy.data());
    }

private:
    // out = W o self + i g (S X - X R) with S given as padded columns.
    void apply(const std::complex<double>* weight, const std::complex<double>* self,
               const std::complex<double>* col_src, const std::complex<double>* row_src,
               std::complex<double>* out) const
    {
        const int L = levels_;
        const std::ptrdiff_t stride = L + 2;
        for (int m = 0; m < L; ++m) {
            const auto* left = m > 0 ? col_src + (m - 1) * stride : zeros_.data();
            const auto* right = m + 1 < L ? col_src + (m + 1) * stride : zeros_.data();
            kernel(m, weight + m * L, self + m * L, left, right, row_src + m * stride, out + m * L);
        }
    }

    // Same as apply, but the column source is an unpadded (L x L) block.
    void apply_unpadded_columns(const std::complex<double>* weight,
                                const std::complex<double>* self,
                                const std::complex<double>* col_src,
                                const std::complex<double>* row_src,
                                std::complex<double>* out) const
    {
        const int L = levels_;
        const std::ptrdiff_t stride = L + 2;
        for (int m = 0; m < L; ++m) {
            const auto* left = m > 0 ? col_src + (m - 1) * L : zeros_.data();
            const auto* right = m + 1 < L ? col_src + (m + 1) * L : zeros_.data();
            kernel(m, weight + m * L, self + m * L, left, right, row_src + m * stride, out + m * L);
        }
    }

    // One column m. row_pad points at the padded column, so row n sits at index n + 1.
    void kernel(int m, const std::complex<double>* weight, const std::complex<double>* self,
                const std::complex<double>* left, const std::complex<double>* right,
                const std::complex<double>* row_pad, std::complex<double>* out) const
    {
        const int L = levels_;
        const double g = g_;
        const double wl = sqrt_[m];
        const double wr = sqrt_[m + 1];
        const double* sq = sqrt_.data();
        const double* w = reinterpret_cast<const double*>(weight);
        const double* x = reinterpret_cast<const double*>(self);
        const double* cl = reinterpret_cast<const double*>(left);
        const double* cr = reinterpret_cast<const double*>(right);
        const double* rp = reinterpret_cast<const double*>(row_pad);
        double* o = reinterpret_cast<double*>(out);
        for (int n = 0; n < L; ++n) {
            const int k = 2 * n;
            // row_pad[n] is row n-1, row_pad[n+2] is row n+1
            const double s_re = wl * cl[k] + wr * cr[k] - sq[n] * rp[k] - sq[n + 1] * rp[k + 4];
            const double s_im =
                wl * cl[k + 1] + wr * cr[k + 1] - sq[n] * rp[k + 1] - sq[n + 1] * rp[k + 5];
            o[k] = w[k] * x[k] - w[k + 1] * x[k + 1] - g * s_im;
            o[k + 1] = w[k] * x[k + 1] + w[k + 1] * x[k] + g * s_re;
        }
    }

    double g_;
    int levels_;
    std::vector<double> sqrt_;
    std::vector<std::complex<double>> phase_;
    std::vector<std::complex<double>> coherence_;
    mutable std::vector<std::complex<double>> padded_;
    std::vector<std::complex<double>> zeros_;
};

} // namespace detail

/// Time derivative of every block coefficient (da/dt, db/dt, dc/dt).
inline DensityState exact_rhs(const ModelParams& params, const DensityState& state)
{
    const detail::ExactRhs rhs(params, state.n_max);
    const CVector y = detail::pack(state);
    CVector dy(y.size());
    rhs(y.data(), dy.data());
    return detail::unpack(dy, state.n_max);
}

struct ExactOptions {
    double truncation_threshold{1e-8};
    bool keep_states{true};
};

inline void validate_output_grid(double t_final, std::span<const double> grid)
{
    if (!(t_final > 0.0) || !std::isfinite(t_final)) {
        throw solver_error("final time must be positive");
    }
    if (grid.empty()) {
        throw solver_error("output grid is empty");
    }
    const double slack = 1e-12 * std::max(1.0, t_final);
    if (grid.front() < 0.0 || grid.back() > t_final + slack) {
        throw solver_error("output grid must lie within [0, t_final]");
    }
}

/**
 * Integrates the coefficient equations from state0 and samples the output grid
 * (times in model units; gt = g * t is stored alongside).
 *
 * Throws truncation_error as soon as a sampled state puts more than
 * opts.truncation_threshold on the top two Fock levels, and solver_error if
 * the trace drifts by more than 10 * rel_tol.
 */
inline Trajectory integrate_exact(const ModelParams& params, const DensityState& state0,
                                  double t_final, std::span<const double> output_grid,
                                  const ode::Tolerances& tol = {}, const ExactOptions& opts = {})
{
    validate_output_grid(t_final, output_grid);
    const detail::ExactRhs rhs(params, state0.n_max);
    const double trace0 = state0.trace();

    Trajectory traj;
    traj.times.reserve(output_grid.size());
    traj.gt.reserve(output_grid.size());
    traj.observables.reserve(output_grid.size());

    // Integrate on the interleaved real view; all Runge-Kutta weights are real.
    using cd = std::complex<double>;
    auto real_rhs = [&rhs](double, const RVector& y, RVector& dy) {
        rhs(reinterpret_cast<const cd*>(y.data()), reinterpret_cast<cd*>(dy.data()));
    };
    const CVector packed = detail::pack(state0);
    const RVector y0 = Eigen::Map<const RVector>(reinterpret_cast<const double*>(packed.data()),
                                                 2 * packed.size());

    auto observe = [&](std::size_t, double t, const RVector& yr) {
        const CVector y = Eigen::Map<const CVector>(reinterpret_cast<const cd*>(yr.data()),
                                                    yr.size() / 2);
        DensityState s = detail::unpack(y, state0.n_max);
        const double gt = params.g() * t;
        const auto check = check_truncation(s, opts.truncation_threshold);
        if (!check.pass) {
            throw truncation_error("exact solver: top-level Fock population " +
                                       format_number(check.tail) + " exceeds threshold at gt=" +
                                       format_number(gt),
                                   check.tail);
        }
        const double drift = std::abs(s.trace() - trace0);
        if (drift > 10.0 * tol.rel_tol) {
            throw solver_error("exact solver: trace drift " + format_number(drift) +
                               " at gt=" + format_number(gt));
        }
        traj.times.push_back(t);
        traj.gt.push_back(gt);
        traj.observables.push_back(observables(s, t, gt));
        if (opts.keep_states) {
            traj.states.push_back(std::move(s));
        }
    };
    traj.stats = ode::integrate<RVector>(real_rhs, y0, 0.0, output_grid, tol, observe);
    return traj;
}

} // namespace mendart
