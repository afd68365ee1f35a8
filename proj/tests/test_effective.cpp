#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace mendart;
using testsupport::cd;

namespace {

// Rate equations written out term by term. At the top level the channels to
// n_max + 1 are closed.
PopulationState reference_rhs(const ModelParams& p, const PopulationState& s)
{
    const auto [v1, v2] = testsupport::rates(p);
    const int N = s.n_max;
    auto at = [N](const RVector& v, int n) { return (n < 0 || n > N) ? 0.0 : v(n); };
    PopulationState d = PopulationState::zero(N);
    for (int n = 0; n <= N; ++n) {
        d.a_diag(n) = -((v1 + v2) * n + v2) * s.a_diag(n) + v1 * n * at(s.b_diag, n - 1) +
                      v2 * (n + 1) * at(s.b_diag, n + 1);
        d.b_diag(n) = -((v1 + v2) * n + v1) * s.b_diag(n) + v2 * n * at(s.a_diag, n - 1) +
                      v1 * (n + 1) * at(s.a_diag, n + 1);
    }
    d.a_diag(N) += v2 * (N + 1) * s.a_diag(N);
    d.b_diag(N) += v1 * (N + 1) * s.b_diag(N);
    return d;
}

PopulationState random_populations(int n_max, std::mt19937& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto s = PopulationState::zero(n_max);
    for (int n = 0; n <= n_max; ++n) {
        s.a_diag(n) = u(rng);
        s.b_diag(n) = u(rng);
    }
    const double total = s.sum();
    s.a_diag /= total;
    s.b_diag /= total;
    return s;
}

} // namespace

TEST(EffectiveRhs, GroundVacuum)
{
    const auto p = testsupport::fig1();
    auto s = PopulationState::zero(5);
    s.a_diag(0) = 1.0;
    const auto d = effective_rhs(p, s);
    EXPECT_NEAR(d.a_diag(0), -6.3898e-5, 5e-10);
    EXPECT_NEAR(d.b_diag(1), 6.3898e-5, 5e-10);
    EXPECT_EQ(d.b_diag(0), 0.0);
    EXPECT_NEAR(d.a_diag(0) + d.b_diag(1), 0.0, 1e-20);
    EXPECT_EQ(d.a_diag.tail(5).cwiseAbs().sum(), 0.0);
}

TEST(EffectiveRhs, MatchesRateEquations)
{
    std::mt19937 rng(21);
    for (const auto& p : {testsupport::fig1(), testsupport::fig2(),
                          make_model_params(1.0, 0.6, 0.07, 0.02, 0.03)}) {
        const auto s = random_populations(12, rng);
        const auto d = effective_rhs(p, s);
        const auto want = reference_rhs(p, s);
        EXPECT_LT((d.a_diag - want.a_diag).cwiseAbs().maxCoeff(), 1e-16);
        EXPECT_LT((d.b_diag - want.b_diag).cwiseAbs().maxCoeff(), 1e-16);
    }
}

TEST(EffectiveRhs, ConservesProbability)
{
    std::mt19937 rng(22);
    const auto p = testsupport::fig2();
    auto s = random_populations(10, rng);
    EXPECT_NEAR(effective_rhs(p, s).sum(), 0.0, 1e-18);
    s.a_diag(10) = 0.0;
    s.b_diag(10) = 0.0;
    EXPECT_NEAR(effective_rhs(p, s).sum(), 0.0, 1e-18);
}

TEST(EffectiveRhs, ZeroCoupling)
{
    std::mt19937 rng(23);
    const auto s = random_populations(6, rng);
    const auto d = effective_rhs(make_model_params(1.0, 1.0, 0.0, 0.08, 0.0), s);
    EXPECT_EQ(d.a_diag.cwiseAbs().sum() + d.b_diag.cwiseAbs().sum(), 0.0);
}

TEST(AdiabaticCoherences, SinglePopulation)
{
    const auto p = testsupport::fig1();
    auto s = PopulationState::zero(4);
    s.b_diag(1) = 1.0;
    const auto c = adiabatic_coherences(p, s);
    const cd want = 0.04 * 1.0 / cd(1.0 * (1 - 0) + 1.0, 0.08);
    EXPECT_NEAR(std::abs(c(0, 1) - want), 0.0, 1e-16);
}

TEST(AdiabaticCoherences, StationaryAndZeroCases)
{
    std::mt19937 rng(24);
    const auto p = make_model_params(1.0, 0.6, 0.05, 0.04, 0.02);
    const auto s = random_populations(8, rng);
    const auto c = adiabatic_coherences(p, s);
    // Closed form: c(n,m) = g X(n,m) (b_m - a_n) / f(n,m)
    for (int n = 0; n <= 8; ++n) {
        for (int m = 0; m <= 8; ++m) {
            const double x = m == n + 1 ? std::sqrt(double(m)) : n == m + 1 ? std::sqrt(double(n)) : 0.0;
            const cd want = 0.05 * x * (s.b_diag(m) - s.a_diag(n)) / f_coefficient(p, n, m);
            EXPECT_NEAR(std::abs(c(n, m) - want), 0.0, 1e-16);
        }
    }
    EXPECT_EQ(testsupport::max_abs(adiabatic_coherences(p, PopulationState::zero(5))), 0.0);
    EXPECT_EQ(testsupport::max_abs(
                  adiabatic_coherences(make_model_params(1.0, 0.6, 0.0, 0.04, 0.02), s)),
              0.0);
}

TEST(AdiabaticCoherences, ReproduceRateEquations)
{
    // Feeding the eliminated coherences back into the exact population
    // equations must give the effective rates.
    std::mt19937 rng(25);
    for (const auto& p : {testsupport::fig1(), testsupport::fig2(),
                          make_model_params(1.0, 0.6, 0.05, 0.04, 0.02)}) {
        const auto pop = random_populations(9, rng);
        auto s = DensityState::zero(9);
        s.a.diagonal() = pop.a_diag.cast<cd>();
        s.b.diagonal() = pop.b_diag.cast<cd>();
        s.c = adiabatic_coherences(p, pop);
        const auto d = exact_rhs(p, s);
        const auto want = effective_rhs(p, pop);
        for (int n = 0; n <= 9; ++n) {
            EXPECT_NEAR(d.a(n, n).real(), want.a_diag(n), 1e-15);
            EXPECT_NEAR(d.b(n, n).real(), want.b_diag(n), 1e-15);
        }
    }
}

TEST(IntegrateEffective, ConservationAndIdentity)
{
    for (const auto& p : {testsupport::fig1(), testsupport::fig2()}) {
        const auto grid = testsupport::gt_grid(300.0, 1.0, p.g());
        const auto traj = integrate_effective(p, diagonal_populations(fock_atom_state(0, false, 46)),
                                              grid.back(), grid);
        ASSERT_EQ(traj.size(), 301u);
        double drift = 0.0;
        for (const auto& s : traj.states) {
            drift = std::max(drift, std::abs(s.sum() - 1.0));
            EXPECT_GE(std::min(s.a_diag.minCoeff(), s.b_diag.minCoeff()), -1e-9);
        }
        EXPECT_LT(drift, 1e-10);
        const auto res = moment_identity_residual(traj.observables, p);
        for (double r : res) {
            EXPECT_LT(std::abs(r), 1e-6);
        }
    }
}

TEST(IntegrateEffective, ZeroCouplingConstant)
{
    const auto p = make_model_params(1.0, 1.0, 0.0, 0.08, 0.0);
    const auto pop = diagonal_populations(thermal_atom_state(0.3, true, 20));
    const std::vector<double> grid{0.0, 100.0, 1000.0};
    const auto traj = integrate_effective(p, pop, 1000.0, grid);
    for (const auto& s : traj.states) {
        EXPECT_EQ(s.a_diag, pop.a_diag);
        EXPECT_EQ(s.b_diag, pop.b_diag);
    }
}

TEST(IntegrateEffective, TruncationGuard)
{
    const auto p = testsupport::fig1();
    const auto grid = testsupport::gt_grid(300.0, 1.0, p.g());
    EXPECT_THROW(integrate_effective(p, diagonal_populations(fock_atom_state(0, false, 3)),
                                     grid.back(), grid),
                 truncation_error);
}
