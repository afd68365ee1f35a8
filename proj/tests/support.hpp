#pragma once

// Reference implementations used only by the tests. They work on the full
// 2(n_max+1) x 2(n_max+1) density matrix in atom-slow order (all ground
// levels first), independently of the library's block and vectorised forms.

#include <complex>
#include <random>

#include <Eigen/Dense>

#include "mendart/mendart.hpp"

namespace testsupport {

using mendart::CMatrix;
using mendart::DensityState;
using mendart::ModelParams;
using cd = std::complex<double>;

inline CMatrix full_matrix(const DensityState& s)
{
    const Eigen::Index L = s.levels();
    CMatrix rho(2 * L, 2 * L);
    rho.topLeftCorner(L, L) = s.a;
    rho.topRightCorner(L, L) = s.c;
    rho.bottomLeftCorner(L, L) = s.c.adjoint();
    rho.bottomRightCorner(L, L) = s.b;
    return rho;
}

inline DensityState from_full(const CMatrix& rho, int n_max)
{
    const Eigen::Index L = n_max + 1;
    DensityState s = DensityState::zero(n_max);
    s.a = rho.topLeftCorner(L, L);
    s.c = rho.topRightCorner(L, L);
    s.b = rho.bottomRightCorner(L, L);
    return s;
}

struct Operators {
    CMatrix H, sz, n;
};

inline Operators operators(const ModelParams& p, int n_max)
{
    const Eigen::Index L = n_max + 1;
    CMatrix a = CMatrix::Zero(L, L);
    for (Eigen::Index k = 1; k < L; ++k) {
        a(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    const CMatrix id = CMatrix::Identity(L, L);
    const CMatrix num = a.adjoint() * a;
    const CMatrix x = a + a.adjoint();

    Operators o;
    o.n = CMatrix::Zero(2 * L, 2 * L);
    o.n.topLeftCorner(L, L) = num;
    o.n.bottomRightCorner(L, L) = num;
    o.sz = CMatrix::Zero(2 * L, 2 * L);
    o.sz.topLeftCorner(L, L) = -id;
    o.sz.bottomRightCorner(L, L) = id;
    // sigma_+ + sigma_- flips the atom: off-diagonal identity blocks.
    CMatrix sx = CMatrix::Zero(2 * L, 2 * L);
    sx.topRightCorner(L, L) = id;
    sx.bottomLeftCorner(L, L) = id;
    CMatrix xfull = CMatrix::Zero(2 * L, 2 * L);
    xfull.topLeftCorner(L, L) = x;
    xfull.bottomRightCorner(L, L) = x;
    o.H = p.omega() * o.n + 0.5 * p.atom_omega() * o.sz + p.g() * xfull * sx;
    return o;
}

/// d rho / dt of the dephasing master equation, written with plain matrix products.
inline CMatrix lindblad(const ModelParams& p, const CMatrix& rho, int n_max)
{
    const auto o = operators(p, n_max);
    const cd i(0.0, 1.0);
    CMatrix out = -i * (o.H * rho - rho * o.H);
    out += 0.5 * p.gamma_a() * (o.sz * rho * o.sz - rho);
    out += p.gamma_c() * (2.0 * o.n * rho * o.n - o.n * o.n * rho - rho * o.n * o.n);
    return out;
}

/// Random positive unit-trace state.
inline DensityState random_state(int n_max, std::mt19937& rng)
{
    std::normal_distribution<double> normal;
    const Eigen::Index D = 2 * (n_max + 1);
    CMatrix A(D, D);
    for (Eigen::Index i = 0; i < D; ++i) {
        for (Eigen::Index j = 0; j < D; ++j) {
            A(i, j) = cd(normal(rng), normal(rng));
        }
    }
    CMatrix rho = A * A.adjoint();
    rho /= rho.trace();
    return from_full(rho, n_max);
}

inline double max_abs(const CMatrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_block_deviation(const DensityState& x, const DensityState& y)
{
    return std::max({max_abs(x.a - y.a), max_abs(x.b - y.b), max_abs(x.c - y.c)});
}

/// Rates of the birth-death ladder from their closed forms.
inline std::pair<double, double> rates(const ModelParams& p)
{
    const double G = p.gamma();
    const double g2 = p.g() * p.g();
    const double dm = p.omega() - p.atom_omega();
    const double dp = p.omega() + p.atom_omega();
    const double v1 = G == 0.0 ? 0.0 : 2.0 * G * g2 / (dm * dm + G * G);
    const double v2 = G == 0.0 ? 0.0 : 2.0 * G * g2 / (dp * dp + G * G);
    return {v1, v2};
}

inline ModelParams fig1() { return mendart::make_model_params(1.0, 1.0, 0.04, 0.08, 0.0); }
inline ModelParams fig2() { return mendart::make_model_params(1.0, 0.2, 0.04, 0.08, 0.0); }

inline std::vector<double> gt_grid(double gt_final, double step, double g)
{
    std::vector<double> t;
    const int count = static_cast<int>(std::lround(gt_final / step));
    for (int k = 0; k <= count; ++k) {
        t.push_back(k * step / g);
    }
    return t;
}

} // namespace testsupport
