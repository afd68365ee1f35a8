#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace mendart;
using testsupport::cd;

namespace {

// Column-stacked vec of a full matrix in the interleaved basis 2n + atom.
Eigen::VectorXcd vec_interleaved(const DensityState& s)
{
    const CMatrix full = testsupport::full_matrix(s);
    const Eigen::Index L = s.levels();
    const Eigen::Index D = 2 * L;
    auto idx = [L](Eigen::Index k) { return k < L ? 2 * k : 2 * (k - L) + 1; };
    CMatrix inter(D, D);
    for (Eigen::Index i = 0; i < D; ++i) {
        for (Eigen::Index j = 0; j < D; ++j) {
            inter(idx(i), idx(j)) = full(i, j);
        }
    }
    return Eigen::Map<const Eigen::VectorXcd>(inter.data(), D * D);
}

} // namespace

TEST(Liouvillian, FreeEvolutionOnly)
{
    const auto p = make_model_params(1.0, 0.7, 0.0, 0.0, 0.0);
    const auto L = build_liouvillian(p, 4);
    std::mt19937 rng(1);
    auto s = testsupport::random_state(4, rng);
    s.c.setZero();
    s.a = CMatrix(s.a.diagonal().asDiagonal());
    s.b = CMatrix(s.b.diagonal().asDiagonal());
    const Eigen::VectorXcd out = L.matrix * vec_interleaved(s);
    EXPECT_LT(out.cwiseAbs().maxCoeff(), 1e-15);
    // -i (H0 x I - I x H0^T) with H0 diagonal: the generator itself is diagonal.
    const CMatrix off = L.matrix - CMatrix(L.matrix.diagonal().asDiagonal());
    EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Liouvillian, MatchesExactRhsOnRandomStates)
{
    const auto p = testsupport::fig1();
    const auto L = build_liouvillian(p, 6);
    std::mt19937 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = testsupport::random_state(6, rng);
        const Eigen::VectorXcd lv = L.matrix * vec_interleaved(s);
        const Eigen::VectorXcd rv = vec_interleaved(exact_rhs(p, s));
        EXPECT_LT((lv - rv).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Liouvillian, MatchesDenseLindbladWithCavityDephasing)
{
    const auto p = make_model_params(1.0, 0.4, 0.06, 0.05, 0.03);
    const auto L = build_liouvillian(p, 5);
    std::mt19937 rng(32);
    const auto s = testsupport::random_state(5, rng);
    const auto want = testsupport::from_full(testsupport::lindblad(p, testsupport::full_matrix(s), 5), 5);
    const Eigen::VectorXcd lv = L.matrix * vec_interleaved(s);
    EXPECT_LT((lv - vec_interleaved(want)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Liouvillian, BasisAndRoundTrip)
{
    EXPECT_EQ(basis_index(false, 0), 0);
    EXPECT_EQ(basis_index(true, 0), 1);
    EXPECT_EQ(basis_index(false, 3), 6);
    EXPECT_EQ(basis_index(true, 3), 7);
    std::mt19937 rng(33);
    const auto s = testsupport::random_state(3, rng);
    const auto back = from_density_matrix(to_density_matrix(s), 3);
    EXPECT_EQ(testsupport::max_block_deviation(s, back), 0.0);
    EXPECT_THROW(from_density_matrix(CMatrix::Zero(5, 5), 3), comparison_error);
}

TEST(Liouvillian, SizeLimits)
{
    const auto p = testsupport::fig1();
    EXPECT_NO_THROW(build_liouvillian(p, 12));
    EXPECT_THROW(build_liouvillian(p, 13), size_error);
    EXPECT_THROW(build_liouvillian(p, 0), range_error);
}

TEST(PropagateOracle, IdentityAtZero)
{
    const auto p = testsupport::fig1();
    const auto L = build_liouvillian(p, 4);
    std::mt19937 rng(34);
    const auto s = testsupport::random_state(4, rng);
    EXPECT_EQ(testsupport::max_block_deviation(propagate_oracle(L, s, 0.0), s), 0.0);
}

TEST(PropagateOracle, AgreesWithExactSolver)
{
    const auto p = testsupport::fig1();
    const auto L = build_liouvillian(p, 6);
    const auto s0 = fock_atom_state(0, false, 6);
    const std::vector<double> grid{1.0 / p.g(), 5.0 / p.g(), 10.0 / p.g()};
    ExactOptions opts;
    opts.truncation_threshold = 1.0;
    const auto traj = integrate_exact(p, s0, grid.back(), grid, {}, opts);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto dev = compare_states(traj.states[i], propagate_oracle(L, s0, grid[i]));
        EXPECT_LT(dev.max_abs, 1e-6) << "gt " << grid[i] * p.g();
    }
}

TEST(PropagateOracle, UniformGridMatchesPointwise)
{
    const auto p = make_model_params(1.0, 0.8, 0.05, 0.1, 0.01);
    const auto L = build_liouvillian(p, 4);
    const auto s0 = fock_atom_state(1, true, 4);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) {
        grid.push_back(2.5 * i);
    }
    const auto states = propagate_oracle_grid(L, s0, grid);
    for (std::size_t i = 0; i < grid.size(); i += 5) {
        EXPECT_LT(compare_states(states[i], propagate_oracle(L, s0, grid[i])).max_abs, 1e-12);
    }
}

TEST(PropagateOracle, RungeKuttaFallback)
{
    const auto p = testsupport::fig1();
    const auto L = build_liouvillian(p, 3);
    const auto s0 = fock_atom_state(0, false, 3);
    PropagationOptions rk;
    rk.max_expm_dim = 1;
    const auto x = propagate_oracle(L, s0, 40.0);
    const auto y = propagate_oracle(L, s0, 40.0, rk);
    EXPECT_LT(compare_states(x, y).max_abs, 1e-9);
}

TEST(PropagateOracle, CoherenceDecayWithoutCoupling)
{
    const double ga = 0.08;
    const auto p = make_model_params(1.0, 1.0, 0.0, ga, 0.0);
    const auto L = build_liouvillian(p, 2);
    auto s0 = DensityState::zero(2);
    s0.a(0, 0) = 0.5;
    s0.b(0, 0) = 0.5;
    s0.c(0, 0) = 0.4;
    for (double t : {1.0, 10.0, 30.0}) {
        const auto s = propagate_oracle(L, s0, t);
        EXPECT_NEAR(std::abs(s.c(0, 0)), 0.4 * std::exp(-ga * t), 1e-13);
    }
}

TEST(PropagateOracle, Positivity)
{
    for (const auto& p : {testsupport::fig1(), testsupport::fig2(),
                          make_model_params(1.0, 1.0, 0.04, 0.08, 0.02)}) {
        const auto L = build_liouvillian(p, 8);
        const auto s0 = thermal_atom_state(0.3, true, 8, 1e-4);
        for (double gt : {0.5, 5.0, 50.0, 300.0}) {
            EXPECT_GE(min_eigenvalue(propagate_oracle(L, s0, gt / p.g())), -1e-8);
        }
    }
}

TEST(CompareStates, Basics)
{
    const auto g0 = fock_atom_state(0, false, 3);
    const auto e0 = fock_atom_state(0, true, 3);
    EXPECT_EQ(compare_states(g0, g0).max_abs, 0.0);
    const auto d = compare_states(g0, e0);
    EXPECT_EQ(d.max_abs, 1.0);
    EXPECT_EQ(d.max_a, 1.0);
    EXPECT_EQ(d.max_b, 1.0);
    EXPECT_EQ(d.max_c, 0.0);
    EXPECT_THROW(compare_states(g0, fock_atom_state(0, false, 4)), comparison_error);
}

TEST(LiouvillianDump, BinaryLayout)
{
    const auto L = build_liouvillian(testsupport::fig1(), 2);
    const auto path = std::filesystem::temp_directory_path() / "mendart_liouvillian_test.bin";
    write_liouvillian(path.string(), L);
    // Header: Hilbert dimension D, then generator dimension D^2.
    const auto D = static_cast<std::uint64_t>(L.dim);
    const auto G = static_cast<std::uint64_t>(L.matrix.rows());
    EXPECT_EQ(G, D * D);
    EXPECT_EQ(std::filesystem::file_size(path), 16 + G * G * 16);

    std::ifstream in(path, std::ios::binary);
    unsigned char head[16];
    in.read(reinterpret_cast<char*>(head), 16);
    std::uint64_t dim = 0, gen = 0;
    for (int k = 7; k >= 0; --k) {
        dim = (dim << 8) | head[k];
        gen = (gen << 8) | head[8 + k];
    }
    EXPECT_EQ(dim, D);
    EXPECT_EQ(gen, G);
    // Row-major: the second pair is entry (0, 1).
    double pair[4];
    in.read(reinterpret_cast<char*>(pair), sizeof pair);
    EXPECT_EQ(pair[0], L.matrix(0, 0).real());
    EXPECT_EQ(pair[1], L.matrix(0, 0).imag());
    EXPECT_EQ(pair[2], L.matrix(0, 1).real());
    EXPECT_EQ(pair[3], L.matrix(0, 1).imag());
    in.close();

    const auto back = read_liouvillian(path.string());
    EXPECT_EQ(back.matrix, L.matrix);
    EXPECT_EQ(back.n_max, 2);
    std::filesystem::remove(path);
    EXPECT_THROW(read_liouvillian(path.string()), io_error);
}
