#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace mendart;

namespace {

std::vector<ObservableRecord> effective_records(const ModelParams& p, double gt_final, double step,
                                                int n_max = 40)
{
    const auto grid = testsupport::gt_grid(gt_final, step, p.g());
    ode::Tolerances tol;
    tol.rel_tol = 1e-11;
    tol.abs_tol = 1e-14;
    return integrate_effective(p, diagonal_populations(fock_atom_state(0, false, n_max)), grid.back(),
                               grid, tol)
        .observables;
}

} // namespace

TEST(Asymptotics, ResonantConstants)
{
    const auto a = asymptotic_predictions(testsupport::fig1());
    // S = 1 + 1 + 0.08^2
    const double S = 2.0064;
    EXPECT_NEAR(a.slope_n, 2 * 0.08 * 0.0016 / S, 1e-18);
    EXPECT_NEAR(a.slope_n, 1.2759e-4, 5e-9);
    EXPECT_NEAR(a.slope_n / 0.04, 3.190e-3, 5e-7);
    EXPECT_NEAR(a.limit_pe_plus_nsz, 0.5 - 1.0 / S, 1e-16);
    EXPECT_NEAR(a.limit_pe_plus_nsz, 1.595e-3, 5e-7);
    EXPECT_NEAR(a.n2sz_ratio, -2.0 / S, 1e-16);
    EXPECT_NEAR(a.n2sz_ratio, -0.99681, 5e-6);
    EXPECT_NEAR(a.quadratic_coeff, 2 * a.slope_n * a.slope_n, 1e-22);
}

TEST(Asymptotics, DispersiveSlope)
{
    const auto a = asymptotic_predictions(testsupport::fig2());
    EXPECT_NEAR(a.slope_n, 2 * 0.08 * 0.0016 / (1.0 + 0.04 + 0.0064), 1e-18);
    EXPECT_NEAR(a.slope_n, 2.4465e-4, 5e-9);
}

TEST(Asymptotics, NoDephasingNoGrowth)
{
    EXPECT_EQ(asymptotic_predictions(make_model_params(1.0, 1.0, 0.04, 0.0, 0.0)).slope_n, 0.0);
}

TEST(Fits, ExactLine)
{
    std::vector<double> t, y;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(0.5 * i);
        y.push_back(3.0 * t.back() - 2.0);
    }
    const auto f = fit_linear_slope(t, y, 0.5);
    EXPECT_NEAR(f.coefficient, 3.0, 1e-12);
    EXPECT_EQ(f.points, 51u);
    EXPECT_LT(f.std_error, 1e-12);
}

TEST(Fits, Quadratic)
{
    std::vector<double> t, y, c;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(i);
        y.push_back(t.back() * t.back());
        c.push_back(4.2);
    }
    EXPECT_NEAR(fit_quadratic_coeff(t, y, 0.5).coefficient, 1.0, 1e-12);
    const auto z = fit_quadratic_coeff(t, c, 0.5);
    EXPECT_LE(std::abs(z.coefficient), std::max(z.std_error, 1e-15));
}

TEST(Fits, NoisyLineErrorBar)
{
    std::mt19937 rng(4);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> t, y;
    for (int i = 0; i < 400; ++i) {
        t.push_back(i);
        y.push_back(0.25 * i + noise(rng));
    }
    const auto f = fit_linear_slope(t, y, 1.0);
    EXPECT_NEAR(f.coefficient, 0.25, 5 * f.std_error);
    // sigma / sqrt(sum (t - tbar)^2)
    EXPECT_NEAR(f.std_error, 0.1 / std::sqrt(400.0 * (400.0 * 400.0 - 1) / 12.0), 5e-6);
}

TEST(Fits, TooFewPoints)
{
    const std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const std::vector<double> y(t.size(), 1.0);
    EXPECT_THROW(fit_linear_slope(t, y, 0.5), comparison_error);
    EXPECT_THROW(fit_linear_slope(t, y, 1.5), comparison_error);
    EXPECT_NO_THROW(fit_linear_slope(t, y, 1.0));
}

TEST(MomentIdentity, EffectiveDynamics)
{
    for (const auto& p : {testsupport::fig1(), testsupport::fig2()}) {
        const auto r = effective_records(p, 100.0, 1.0);
        for (double x : moment_identity_residual(r, p)) {
            EXPECT_LT(std::abs(x), 1e-6);
        }
    }
}

TEST(MomentIdentity, ZeroCoupling)
{
    const auto p = make_model_params(1.0, 1.0, 0.0, 0.08, 0.0);
    std::vector<ObservableRecord> r(5, observables(fock_atom_state(0, false, 3)));
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i].t = 10.0 * i;
    }
    for (double x : moment_identity_residual(r, p)) {
        EXPECT_EQ(x, 0.0);
    }
    EXPECT_THROW(moment_identity_residual(std::span(r.data(), 1), p), comparison_error);
}

TEST(MomentEquations, SecondOrderConvergence)
{
    const auto p = testsupport::fig1();
    auto worst = [&](double step) {
        const auto r = effective_records(p, 20.0, step);
        const auto res = moment_ode_residuals(r, p);
        return std::max({res.max_abs(res.mean_n), res.max_abs(res.p_e), res.max_abs(res.n_sigma_z),
                         res.max_abs(res.mean_n2)});
    };
    // The spacing must resolve 1 / v1 = 25 time units before the order shows.
    const double coarse = worst(0.025);
    const double fine = worst(0.0125);
    EXPECT_NEAR(std::log2(coarse / fine), 2.0, 0.25);
    EXPECT_LT(fine, 1e-7);
}

TEST(MomentEquations, ResidualWithinRichardsonBound)
{
    const auto p = testsupport::fig2();
    const auto r = effective_records(p, 60.0, 0.25);
    const auto res = moment_ode_residuals(r, p);
    EXPECT_FALSE(res.grid_too_coarse);
    for (const auto* v : {&res.mean_n, &res.p_e, &res.n_sigma_z, &res.mean_n2}) {
        EXPECT_LT(res.max_abs(*v), 2.0 * res.max_fd_error + 1e-9);
    }
}

TEST(MomentEquations, ConstantTrajectory)
{
    const auto p = make_model_params(1.0, 1.0, 0.0, 0.08, 0.0);
    std::vector<ObservableRecord> r(6, observables(fock_atom_state(2, true, 4)));
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i].t = 1.0 * i;
    }
    const auto res = moment_ode_residuals(r, p);
    for (const auto* v : {&res.mean_n, &res.p_e, &res.n_sigma_z, &res.mean_n2}) {
        EXPECT_EQ(res.max_abs(*v), 0.0);
    }
}
