#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mendart/errors.hpp"
#include "mendart/integrator.hpp"
#include "mendart/model.hpp"
#include "mendart/states.hpp"

namespace mendart {

// Brute-force reference: the full Liouvillian on the truncated atom-field space.
//
// Basis ordering is interleaved with the atom index running fastest:
//   |g,0>, |e,0>, |g,1>, |e,1>, ...   i.e. index(atom, n) = 2 n + atom.
// Density matrices are vectorised by column stacking: vec(rho)[i + D j] = rho(i, j).

struct Liouvillian {
    int n_max{0};
    Eigen::Index dim{0};  // Hilbert-space dimension 2 (n_max + 1)
    CMatrix matrix;       // dim^2 x dim^2
};

inline constexpr Eigen::Index basis_index(bool excited, int n)
{
    return 2 * static_cast<Eigen::Index>(n) + (excited ? 1 : 0);
}

/// Full rho from the block coefficients.
inline CMatrix to_density_matrix(const DensityState& s)
{
    const Eigen::Index dim = 2 * s.levels();
    CMatrix rho = CMatrix::Zero(dim, dim);
    for (int m = 0; m <= s.n_max; ++m) {
        for (int n = 0; n <= s.n_max; ++n) {
            rho(basis_index(false, n), basis_index(false, m)) = s.a(n, m);
            rho(basis_index(true, n), basis_index(true, m)) = s.b(n, m);
            rho(basis_index(false, n), basis_index(true, m)) = s.c(n, m);
            rho(basis_index(true, n), basis_index(false, m)) = std::conj(s.c(m, n));
        }
    }
    return rho;
}

/// Block coefficients from a full rho; the e-g block is taken as implied by c.
inline DensityState from_density_matrix(const CMatrix& rho, int n_max)
{
    auto s = DensityState::zero(n_max);
    if (rho.rows() != 2 * s.levels() || rho.cols() != rho.rows()) {
        throw comparison_error("density matrix shape does not match truncation");
    }
    for (int m = 0; m <= n_max; ++m) {
        for (int n = 0; n <= n_max; ++n) {
            s.a(n, m) = rho(basis_index(false, n), basis_index(false, m));
            s.b(n, m) = rho(basis_index(true, n), basis_index(true, m));
            s.c(n, m) = rho(basis_index(false, n), basis_index(true, m));
        }
    }
    return s;
}

/// Rabi Hamiltonian omega n + (Omega/2) sigma_z + g (a + a^dag)(sigma_+ + sigma_-).
inline CMatrix rabi_hamiltonian(const ModelParams& p, int n_max)
{
    const Eigen::Index dim = 2 * static_cast<Eigen::Index>(n_max + 1);
    CMatrix h = CMatrix::Zero(dim, dim);
    for (int n = 0; n <= n_max; ++n) {
        h(basis_index(false, n), basis_index(false, n)) = p.omega() * n - 0.5 * p.atom_omega();
        h(basis_index(true, n), basis_index(true, n)) = p.omega() * n + 0.5 * p.atom_omega();
        if (n < n_max) {
            const double coupling = p.g() * std::sqrt(n + 1.0);
            // a^dag sigma_+ and a^dag sigma_- plus their conjugates
            h(basis_index(true, n + 1), basis_index(false, n)) = coupling;
            h(basis_index(false, n), basis_index(true, n + 1)) = coupling;
            h(basis_index(false, n + 1), basis_index(true, n)) = coupling;
            h(basis_index(true, n), basis_index(false, n + 1)) = coupling;
        }
    }
    return h;
}

struct OracleLimits {
    Eigen::Index max_generator_dim{676};  // (2 * 13)^2, i.e. n_max <= 12
};

inline Liouvillian build_liouvillian(const ModelParams& p, int n_max, const OracleLimits& limits = {})
{
    if (n_max < 1) {
        throw range_error("oracle needs n_max >= 1");
    }
    const Eigen::Index dim = 2 * static_cast<Eigen::Index>(n_max + 1);
    const Eigen::Index gen = dim * dim;
    if (gen > limits.max_generator_dim) {
        throw size_error("Liouvillian of dimension " + format_number(gen) +
                         " exceeds the cap of " + format_number(limits.max_generator_dim));
    }
    const CMatrix h = rabi_hamiltonian(p, n_max);
    const std::complex<double> i1(0.0, 1.0);

    Liouvillian L{n_max, dim, CMatrix::Zero(gen, gen)};
    auto photons = [](Eigen::Index i) { return static_cast<double>(i / 2); };
    auto sz = [](Eigen::Index i) { return (i % 2 == 1) ? 1.0 : -1.0; };

    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            const Eigen::Index row = i + dim * j;
            for (Eigen::Index k = 0; k < dim; ++k) {
                if (h(i, k) != 0.0) {
                    L.matrix(row, k + dim * j) += -i1 * h(i, k);
                }
                if (h(k, j) != 0.0) {
                    L.matrix(row, i + dim * k) += i1 * h(k, j);
                }
            }
            const double ni = photons(i);
            const double nj = photons(j);
            L.matrix(row, row) += 0.5 * p.gamma_a() * (sz(i) * sz(j) - 1.0) +
                                  p.gamma_c() * (2.0 * ni * nj - ni * ni - nj * nj);
        }
    }
    return L;
}

struct PropagationOptions {
    Eigen::Index max_expm_dim{676};  // larger generators use the Runge-Kutta fallback
    ode::Tolerances fallback_tolerances{1e-11, 1e-13};
};

namespace detail {

inline Eigen::VectorXcd vectorize(const DensityState& s)
{
    return to_density_matrix(s).reshaped();
}

inline DensityState unvectorize(const Eigen::VectorXcd& v, const Liouvillian& L)
{
    return from_density_matrix(v.reshaped(L.dim, L.dim), L.n_max);
}

inline void require_finite(const Eigen::VectorXcd& v)
{
    if (!v.allFinite()) {
        throw solver_error("oracle propagation produced non-finite values");
    }
}

inline void require_matching(const Liouvillian& L, const DensityState& s)
{
    if (s.n_max != L.n_max) {
        throw range_error("state truncation " + format_number(s.n_max) +
                          " does not match Liouvillian truncation " + format_number(L.n_max));
    }
}

inline Eigen::VectorXcd propagate_rk(const Liouvillian& L, const Eigen::VectorXcd& v0, double t,
                                     const ode::Tolerances& tol)
{
    Eigen::VectorXcd out = v0;
    auto rhs = [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) { dy.noalias() = L.matrix * y; };
    const double grid[] = {t};
    ode::integrate<Eigen::VectorXcd>(rhs, v0, 0.0, grid, tol,
                                     [&](std::size_t, double, const Eigen::VectorXcd& y) { out = y; });
    return out;
}

} // namespace detail

/// rho(t) = exp(L t) rho(0), via scaling-and-squaring Pade (Eigen's MatrixFunctions).
inline DensityState propagate_oracle(const Liouvillian& L, const DensityState& state0, double t,
                                     const PropagationOptions& opts = {})
{
    detail::require_matching(L, state0);
    if (!(t >= 0.0)) {
        throw solver_error("propagation time must be non-negative");
    }
    if (t == 0.0) {
        return state0;
    }
    const Eigen::VectorXcd v0 = detail::vectorize(state0);
    Eigen::VectorXcd v;
    if (L.matrix.rows() <= opts.max_expm_dim) {
        const CMatrix generator = L.matrix * t;
        const CMatrix propagator = generator.exp();
        v = propagator * v0;
    } else {
        v = detail::propagate_rk(L, v0, t, opts.fallback_tolerances);
    }
    detail::require_finite(v);
    return detail::unvectorize(v, L);
}

/// Propagates to every time of a non-decreasing grid. A uniform grid reuses a
/// single one-step propagator.
inline std::vector<DensityState> propagate_oracle_grid(const Liouvillian& L,
                                                       const DensityState& state0,
                                                       std::span<const double> grid,
                                                       const PropagationOptions& opts = {})
{
    detail::require_matching(L, state0);
    std::vector<DensityState> out;
    if (grid.empty()) {
        return out;
    }
    out.reserve(grid.size());
    bool uniform = grid.size() >= 3 && L.matrix.rows() <= opts.max_expm_dim;
    const double step = grid.size() >= 2 ? grid[1] - grid[0] : 0.0;
    for (std::size_t i = 1; uniform && i < grid.size(); ++i) {
        uniform = std::abs((grid[i] - grid[i - 1]) - step) <= 1e-9 * std::max(1.0, std::abs(step));
    }
    if (!uniform || !(step > 0.0)) {
        for (double t : grid) {
            out.push_back(propagate_oracle(L, state0, t, opts));
        }
        return out;
    }
    const CMatrix generator = L.matrix * step;
    const CMatrix propagator = generator.exp();
    Eigen::VectorXcd v = detail::vectorize(propagate_oracle(L, state0, grid[0], opts));
    out.push_back(detail::unvectorize(v, L));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        v = propagator * v;
        detail::require_finite(v);
        out.push_back(detail::unvectorize(v, L));
    }
    return out;
}

struct StateDeviation {
    double max_abs{0.0};
    double max_a{0.0};
    double max_b{0.0};
    double max_c{0.0};
};

inline StateDeviation compare_states(const DensityState& x, const DensityState& y)
{
    if (x.n_max != y.n_max || x.a.rows() != y.a.rows() || x.b.rows() != y.b.rows() ||
        x.c.rows() != y.c.rows()) {
        throw comparison_error("cannot compare states with truncations " +
                               format_number(x.n_max) + " and " + format_number(y.n_max));
    }
    StateDeviation d;
    d.max_a = (x.a - y.a).cwiseAbs().maxCoeff();
    d.max_b = (x.b - y.b).cwiseAbs().maxCoeff();
    d.max_c = (x.c - y.c).cwiseAbs().maxCoeff();
    d.max_abs = std::max({d.max_a, d.max_b, d.max_c});
    return d;
}

/// Smallest eigenvalue of the Hermitian part of rho.
inline double min_eigenvalue(const DensityState& s)
{
    const CMatrix rho = to_density_matrix(s);
    const CMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

// Binary layout of a dumped Liouvillian, all little-endian:
//   uint64  Hilbert-space dimension D
//   uint64  generator dimension D^2
//   D^2 * D^2 entries, row-major, each as (real, imag) float64 pairs.

namespace detail {

template <class T>
void write_le(std::ostream& os, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& is)
{
    unsigned char bytes[sizeof(T)];
    is.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!is) {
        throw io_error("truncated Liouvillian dump");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

} // namespace detail

inline void write_liouvillian(const std::string& path, const Liouvillian& L)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw io_error("cannot open " + path + " for writing");
    }
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(L.dim));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(L.matrix.rows()));
    for (Eigen::Index r = 0; r < L.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < L.matrix.cols(); ++c) {
            detail::write_le<double>(os, L.matrix(r, c).real());
            detail::write_le<double>(os, L.matrix(r, c).imag());
        }
    }
    if (!os) {
        throw io_error("failed writing " + path);
    }
}

inline Liouvillian read_liouvillian(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw io_error("cannot open " + path);
    }
    const auto dim = static_cast<Eigen::Index>(detail::read_le<std::uint64_t>(is));
    const auto gen = static_cast<Eigen::Index>(detail::read_le<std::uint64_t>(is));
    if (dim < 4 || dim % 2 != 0 || gen != dim * dim) {
        throw io_error("inconsistent Liouvillian header in " + path);
    }
    Liouvillian L{static_cast<int>(dim / 2 - 1), dim, CMatrix(gen, gen)};
    for (Eigen::Index r = 0; r < gen; ++r) {
        for (Eigen::Index c = 0; c < gen; ++c) {
            const double re = detail::read_le<double>(is);
            const double im = detail::read_le<double>(is);
            L.matrix(r, c) = {re, im};
        }
    }
    return L;
}

} // namespace mendart
