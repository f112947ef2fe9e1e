#include <cmc/jacobi.hpp>
#include <cmc/neighbor.hpp>
#include <cmc/nonlinear.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cmc;

namespace {

constexpr double pi = std::numbers::pi;

NormalGraphField neighbor_field(double eps, double eta, int n_t, int n_theta, bool stretched)
{
    const auto base = solve_profile(eps, static_cast<std::size_t>(n_t));
    const double scale = stretched ? solve_profile(eps + eta, 64).period() / base.period() : 1.0;
    auto f = NormalGraphField::zero(base, n_theta, scale);
    const auto u = delaunay_neighbor_graph(eps, eta, static_cast<std::size_t>(n_t), stretched);
    for (Eigen::Index i = 0; i < n_t; ++i)
        f.phi.row(i).setConstant(u[static_cast<std::size_t>(i)]);
    return f;
}

Grid smooth_bump(const NormalGraphField& f)
{
    Grid d(f.n_t(), f.n_theta());
    const double T = f.base.period();
    for (Eigen::Index i = 0; i < f.n_t(); ++i) {
        const double t = f.base.samples()[static_cast<std::size_t>(i)].t;
        for (Eigen::Index j = 0; j < f.n_theta(); ++j)
            d(i, j) = std::exp(std::sin(2 * pi * t / T)) * (1 + 0.5 * std::cos(f.theta(j))) +
                      0.3 * std::cos(2 * f.theta(j)) * std::cos(2 * pi * t / T);
    }
    return d;
}

double sup(const Grid& g) { return g.cwiseAbs().maxCoeff(); }

} // namespace

TEST(ResidualN, DelaunayBaseVanishesAtSecondOrder)
{
    std::vector<double> err;
    for (int n : {64, 128, 256})
        err.push_back(sup(residual_N(NormalGraphField::zero(solve_profile(0.7, n), 16))));
    EXPECT_GE(std::log2(err[0] / err[1]), 1.9);
    EXPECT_GE(std::log2(err[1] / err[2]), 1.9);
}

TEST(ResidualN, CylinderConstantPerturbation)
{
    for (double c : {0.1, -0.2, 0.5}) {
        auto f = NormalGraphField::zero(solve_profile(1.0, 32), 16);
        f.phi.setConstant(c);
        const Grid n = residual_N(f);
        EXPECT_LE((n.array() - 2 * (1 / (1 + c) - 1)).abs().maxCoeff(), 1e-12) << "c=" << c;
    }
}

TEST(ResidualN, AxialTranslationIsSecondOrderInShift)
{
    const auto base = solve_profile(0.7, 256);
    const auto zero = NormalGraphField::zero(base, 16);
    const Grid n0 = residual_N(zero);
    const Grid dir = geometric_jacobi_fields(base, 1e-4, 16).phi_0_1.field.values;
    std::vector<double> err;
    for (double s : {2e-2, 1e-2, 5e-3}) {
        auto f = zero;
        f.phi = s * dir;
        err.push_back(sup(residual_N(f) - n0));
    }
    EXPECT_GE(std::log2(err[0] / err[1]), 1.8);
    EXPECT_GE(std::log2(err[1] / err[2]), 1.8);
}

TEST(ResidualN, DegenerateSurfaceThrows)
{
    auto f = NormalGraphField::zero(solve_profile(0.5, 32), 16);
    f.phi.setConstant(-0.6);
    EXPECT_THROW(residual_N(f), DomainError);
    f.phi.resize(5, 16);
    EXPECT_THROW(residual_N(f), DomainError);
}

TEST(LinearizeN, MatchesAssembledJacobiOperator)
{
    // The two t-stencils agree to O(h^2); 1e-4 needs n_t = 256 at eps = 0.5.
    for (double eps : {0.5, 0.7}) {
        const auto base = solve_profile(eps, 256);
        const auto f = NormalGraphField::zero(base, 16);
        const Grid d = smooth_bump(f);
        const Grid lin = linearize_N(f, d, 1e-5);
        const Grid ref = -2.0 * JacobiOperator(base).apply(d);
        EXPECT_LE(sup(lin - ref) / sup(ref), 1e-4) << "eps=" << eps;
    }
}

TEST(LinearizeN, CylinderKernelDirection)
{
    const auto base = solve_profile(1.0, 128);
    const auto f = NormalGraphField::zero(base, 16);
    Grid d(f.n_t(), f.n_theta());
    for (Eigen::Index i = 0; i < f.n_t(); ++i)
        d.row(i).setConstant(std::cos(base.samples()[static_cast<std::size_t>(i)].t));
    // The discrete kernel of f'' + f differs from cos t by O(h^2).
    EXPECT_LE(sup(linearize_N(f, d, 1e-5)), 2 * std::pow(base.spacing(), 2));
}

TEST(LinearizeN, AxialJacobiFieldIsNearKernel)
{
    std::vector<double> err;
    for (int n : {64, 128, 256}) {
        const auto base = solve_profile(0.6, static_cast<std::size_t>(n));
        const auto f = NormalGraphField::zero(base, 16);
        const Grid d = geometric_jacobi_fields(base, 1e-4, 16).phi_0_1.field.values;
        err.push_back(sup(linearize_N(f, d, 1e-5)));
    }
    EXPECT_GE(std::log2(err[0] / err[1]), 1.9);
    EXPECT_GE(std::log2(err[1] / err[2]), 1.9);
}

TEST(LinearizeN, QuadraticRemainder)
{
    const auto base = solve_profile(0.7, 64);
    const auto f = NormalGraphField::zero(base, 16);
    const Grid d = smooth_bump(f);
    const Grid n0 = residual_N(f), l = linearize_N(f, d, 1e-5);
    std::vector<double> err;
    for (double s : {4e-2, 2e-2, 1e-2, 5e-3}) {
        auto g = f;
        g.phi = s * d;
        err.push_back(sup(residual_N(g) - n0 - s * l));
    }
    for (std::size_t k = 1; k < err.size(); ++k)
        EXPECT_GE(std::log2(err[k - 1] / err[k]), 1.9);
}

TEST(NewtonSolve, RecoversNeighborFromNoisyGuess)
{
    // The discrete solution differs from the geometric oracle by O(h^2); the
    // gap at n_t must be within 5x the change of that gap under refinement.
    std::vector<double> err;
    for (int n : {32, 64}) {
        const auto oracle = neighbor_field(0.7, 0.05, n, 16, true);
        auto init = oracle;
        init.phi += uniform_noise(init.n_t(), init.n_theta(), 1e-3, 42);
        const auto rep = newton_solve(oracle.base, init, GaugeSpec{}, 1e-10, 20);
        ASSERT_TRUE(rep.converged) << rep.message;
        EXPECT_LE(rep.iterations, 12);
        const auto& r = rep.residual_history;
        ASSERT_GE(r.size(), 3u);
        // Terminal quadratic decay, down to the roundoff floor of the stencil.
        const double floor = 1e-10;
        EXPECT_LE(r.back(), 100 * std::max(r[r.size() - 2] * r[r.size() - 2], floor));
        EXPECT_LE(r[r.size() - 2], 100 * std::max(r[r.size() - 3] * r[r.size() - 3], floor));
        err.push_back(sup(rep.solution.phi - oracle.phi));
    }
    EXPECT_LE(err[1], 5 * std::abs(err[0] - err[1]));
    EXPECT_GE(std::log2(err[0] / err[1]), 1.5);
}

TEST(NewtonSolve, StartingAtSolutionStays)
{
    const auto oracle = neighbor_field(0.7, 0.05, 32, 16, true);
    const auto first = newton_solve(oracle.base, oracle, GaugeSpec{}, 1e-10, 20);
    ASSERT_TRUE(first.converged);
    const auto again = newton_solve(oracle.base, first.solution, GaugeSpec{}, 1e-10, 20);
    ASSERT_TRUE(again.converged);
    EXPECT_LE(again.iterations, 2);
    EXPECT_LE(sup(again.solution.phi - first.solution.phi), 1e-9);
}

TEST(NewtonSolve, CylinderShrinksBackToUnitRadius)
{
    auto f = NormalGraphField::zero(solve_profile(1.0, 32), 16);
    f.phi.setConstant(0.1);
    const auto rep = newton_solve(f.base, f, GaugeSpec{}, 1e-10, 20);
    ASSERT_TRUE(rep.converged);
    EXPECT_LE(sup(rep.solution.phi), 1e-10);
}

TEST(NewtonSolve, CylinderPeriodRelaxationIsSingular)
{
    auto f = NormalGraphField::zero(solve_profile(1.0, 32), 16);
    f.phi.setConstant(0.1);
    GaugeSpec g;
    g.relax_period = true;
    EXPECT_THROW(newton_solve(f.base, f, g, 1e-10, 20), SolverError);
}

TEST(NewtonSolve, RelaxedPeriodApproachesTargetPeriod)
{
    std::vector<double> err;
    for (int n : {32, 64}) {
        const auto init = neighbor_field(0.7, 0.05, n, 16, false);
        GaugeSpec g;
        g.relax_period = true;
        const auto rep = newton_solve(init.base, init, g, 1e-10, 30);
        ASSERT_TRUE(rep.converged) << rep.message;
        const double want = solve_profile(0.75, 64).period() / init.base.period();
        err.push_back(std::abs(rep.solution.axial_scale - want));
    }
    EXPECT_LE(err[0], 3e-3);
    EXPECT_GE(std::log2(err[0] / err[1]), 1.5);
}

TEST(NewtonSolve, SolutionSatisfiesGauge)
{
    auto init = neighbor_field(0.7, 0.05, 32, 16, true);
    init.phi += uniform_noise(init.n_t(), init.n_theta(), 1e-3, 7);
    const auto rep = newton_solve(init.base, init, GaugeSpec{}, 1e-10, 20);
    ASSERT_TRUE(rep.converged);
    const Grid w = detail::area_weights(rep.solution);
    for (const Grid& c : detail::gauge_fields(rep.solution, GaugeSpec{}))
        EXPECT_LE(std::abs((w.array() * c.array() * rep.solution.phi.array()).sum()), 1e-9);
}

TEST(NewtonSolve, AxialReparametrizationGivesSameSolution)
{
    const auto oracle = neighbor_field(0.7, 0.05, 32, 16, true);
    const Grid shift = geometric_jacobi_fields(oracle.base, 1e-4, 16).phi_0_1.field.values;
    auto a = oracle, b = oracle;
    a.phi += uniform_noise(a.n_t(), a.n_theta(), 1e-3, 3);
    b.phi += 2e-2 * shift;
    const auto ra = newton_solve(a.base, a, GaugeSpec{}, 1e-10, 20);
    const auto rb = newton_solve(b.base, b, GaugeSpec{}, 1e-10, 20);
    ASSERT_TRUE(ra.converged && rb.converged);
    EXPECT_LE(sup(ra.solution.phi - rb.solution.phi), 1e-8);
}

TEST(NewtonSolve, IterationLimitIsReportedNotThrown)
{
    auto init = neighbor_field(0.7, 0.05, 32, 16, true);
    init.phi += uniform_noise(init.n_t(), init.n_theta(), 1e-3, 42);
    const auto rep = newton_solve(init.base, init, GaugeSpec{}, 1e-10, 1);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    EXPECT_FALSE(rep.message.empty());
}

TEST(UniformNoise, DeterministicAndBounded)
{
    const Grid a = uniform_noise(10, 8, 1e-3, 5), b = uniform_noise(10, 8, 1e-3, 5), c = uniform_noise(10, 8, 1e-3, 6);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_LE(sup(a), 1e-3);
}
