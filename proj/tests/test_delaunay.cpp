#include <cmc/delaunay.hpp>
#include <cmc/geometry.hpp>
#include <cmc/neighbor.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cmc;

namespace {

constexpr double pi = std::numbers::pi;

// Fixed-step RK4 on (rho, rho_t); the period is the second sign change of
// rho_t, located by cubic Hermite interpolation inside the step.
double rk4_period(double eps, double h = 2e-4)
{
    auto f = [](double r, double rt, double& dr, double& drt) {
        const double v = std::sqrt(1 + rt * rt);
        dr = rt;
        drt = v * v * v * (1 / (r * v) - 1);
    };
    double r = eps, rt = 0, t = 0;
    int crossings = 0;
    while (t < 50) {
        double k1r, k1v, k2r, k2v, k3r, k3v, k4r, k4v;
        f(r, rt, k1r, k1v);
        f(r + 0.5 * h * k1r, rt + 0.5 * h * k1v, k2r, k2v);
        f(r + 0.5 * h * k2r, rt + 0.5 * h * k2v, k3r, k3v);
        f(r + h * k3r, rt + h * k3v, k4r, k4v);
        const double nr = r + h / 6 * (k1r + 2 * k2r + 2 * k3r + k4r);
        const double nrt = rt + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
        if ((rt > 0 && nrt <= 0) || (rt < 0 && nrt >= 0)) {
            if (++crossings == 2) {
                // rho_t is smooth; bisect its cubic Hermite interpolant.
                double a0, a1, dummy;
                f(r, rt, dummy, a0);
                f(nr, nrt, dummy, a1);
                auto p = [&](double s) {
                    const double s2 = s * s, s3 = s2 * s;
                    return (2 * s3 - 3 * s2 + 1) * rt + (s3 - 2 * s2 + s) * h * a0 + (-2 * s3 + 3 * s2) * nrt +
                           (s3 - s2) * h * a1;
                };
                double lo = 0, hi = 1;
                for (int k = 0; k < 60; ++k) {
                    const double m = 0.5 * (lo + hi);
                    ((p(lo) < 0) == (p(m) < 0) ? lo : hi) = m;
                }
                return t + h * 0.5 * (lo + hi);
            }
        }
        r = nr;
        rt = nrt;
        t += h;
    }
    return NAN;
}

} // namespace

TEST(ConservedEnergy, ClosedForms)
{
    EXPECT_DOUBLE_EQ(conserved_energy(1.0, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(conserved_energy(0.5, 0.0), 0.375);
    EXPECT_THROW(conserved_energy(0.0, 0.0), DomainError);
}

TEST(SolveProfile, CylinderIsFixedPoint)
{
    const auto p = solve_profile(1.0, 64);
    EXPECT_DOUBLE_EQ(p.period(), 2 * pi);
    EXPECT_DOUBLE_EQ(p.bulge(), 1.0);
    for (const auto& s : p.samples()) {
        EXPECT_EQ(s.rho, 1.0);
        EXPECT_EQ(s.rho_t, 0.0);
    }
}

TEST(SolveProfile, RejectsOutOfRangeEpsilon)
{
    EXPECT_THROW(solve_profile(0.0, 64), DomainError);
    EXPECT_THROW(solve_profile(-0.2, 64), DomainError);
    EXPECT_THROW(solve_profile(1.5, 64), DomainError);
    EXPECT_THROW(solve_profile(5e-4, 64), DomainError);
}

TEST(SolveProfile, BulgePairsWithNeckThroughEnergy)
{
    for (double eps : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        // Both extrema solve x - x^2/2 = E; the other root of x^2 - 2x + 2E.
        const double e = eps - eps * eps / 2;
        const double oracle = 1 + std::sqrt(1 - 2 * e);
        const auto p = solve_profile(eps, 256);
        EXPECT_NEAR(p.bulge(), oracle, 1e-8) << "eps=" << eps;
        EXPECT_NEAR(p.bulge(), bulge_of(eps), 1e-8);
        EXPECT_NEAR(p.max_rho(), oracle, 1e-3);
        EXPECT_NEAR(p.min_rho(), eps, 1e-12);
    }
}

TEST(SolveProfile, EnergyConservedAlongSamples)
{
    for (double eps : {0.05, 0.2, 0.6, 0.95}) {
        const auto p = solve_profile(eps, 512);
        double drift = 0;
        for (const auto& s : p.samples())
            drift = std::max(drift, std::abs(conserved_energy(s.rho, s.rho_t) - p.energy()));
        EXPECT_LE(drift, 1e-10) << "eps=" << eps;
    }
}

TEST(SolveProfile, PeriodMatchesFixedStepOracle)
{
    for (double eps : {0.2, 0.5, 0.8}) {
        const auto p = solve_profile(eps, 64);
        EXPECT_NEAR(p.period(), rk4_period(eps), 1e-8) << "eps=" << eps;
    }
}

TEST(SolveProfile, PeriodLimits)
{
    EXPECT_NEAR(solve_profile(0.999, 64).period(), 2 * pi, 1e-2);
    EXPECT_NEAR(solve_profile(0.01, 64).period(), 4.0, 0.2);
    // Approaching the sphere string, the period decreases toward 4.
    double prev = 10;
    for (double eps : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        const double t = solve_profile(eps, 64).period();
        EXPECT_LT(t, prev);
        prev = t;
    }
}

TEST(SolveProfile, PeriodicInterpolation)
{
    const auto p = solve_profile(0.4, 256);
    const auto a = p.at(0.3), b = p.at(0.3 + 3 * p.period()), c = p.at(0.3 - p.period());
    EXPECT_NEAR(a.rho, b.rho, 1e-12);
    EXPECT_NEAR(a.rho, c.rho, 1e-12);
    const auto dense = solve_profile(0.4, 4096);
    EXPECT_NEAR(p.at(1.2345).rho, dense.at(1.2345).rho, 1e-8);
}

TEST(BulgeOf, Values)
{
    EXPECT_DOUBLE_EQ(bulge_of(1.0), 1.0);
    EXPECT_DOUBLE_EQ(bulge_of(0.5), 1.5);
    EXPECT_NEAR(bulge_of(1e-3), 2.0, 1e-3);
}

TEST(ExtremalNeck, SolvesRatioEquation)
{
    for (int k = 3; k <= 10; ++k) {
        // oracle: bisection on eps / (2 - eps) = 1 / (k - 1)
        double lo = 0, hi = 1;
        for (int i = 0; i < 80; ++i) {
            const double m = 0.5 * (lo + hi);
            (m / (2 - m) < 1.0 / (k - 1) ? lo : hi) = m;
        }
        EXPECT_NEAR(extremal_neck(k), lo, 1e-14);
    }
    EXPECT_DOUBLE_EQ(extremal_neck(3), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(extremal_neck(4), 0.5);
    EXPECT_THROW(extremal_neck(2), DomainError);
    for (int k = 4; k < 40; ++k)
        EXPECT_LT(extremal_neck(k), extremal_neck(k - 1));
}

TEST(EmbedProfile, ExtentAndCylinder)
{
    const auto p = solve_profile(0.5, 128);
    const auto g = embed_profile(p, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 16, 2);
    EXPECT_NEAR(g.n_t() * g.dt, 2 * p.period(), 1e-12);

    const Eigen::Vector3d o(0.3, -1, 2), d = Eigen::Vector3d(1, 2, -0.5).normalized();
    const auto cyl = embed_profile(solve_profile(1.0, 32), o, d, 16, 1);
    for (Eigen::Index i = 0; i < cyl.n_t(); ++i)
        for (Eigen::Index j = 0; j < cyl.n_theta(); ++j) {
            const Eigen::Vector3d x = cyl.point(i, j) - o;
            EXPECT_NEAR((x - x.dot(d) * d).norm(), 1.0, 1e-14);
        }
    EXPECT_THROW(embed_profile(p, o, Eigen::Vector3d::Zero(), 16, 1), DomainError);
}

TEST(SurfaceGeometry, UnitCylinder)
{
    const auto g = embed_profile(solve_profile(1.0, 32), Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 1, 1), 16, 1);
    const auto geo = surface_geometry(g);
    EXPECT_LE((geo.mean_curvature.array() - 1).abs().maxCoeff(), 1e-10);
    EXPECT_LE((geo.second_form_norm_sq.array() - 1).abs().maxCoeff(), 1e-10);
    EXPECT_LE(geo.kappa1.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SurfaceGeometry, NeckCurvatures)
{
    const auto g = embed_profile(solve_profile(0.5, 512), Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 16, 1);
    const auto geo = surface_geometry(g);
    EXPECT_NEAR(geo.kappa2(0, 3), 2.0, 1e-4);
    EXPECT_NEAR(geo.kappa1(0, 3), -1.0, 1e-4);
    EXPECT_NEAR(geo.second_form_norm_sq(0, 3), 5.0, 1e-4);
}

TEST(SurfaceGeometry, MeanCurvatureSecondOrder)
{
    for (double eps : {0.1, 0.4, 0.8}) {
        std::vector<double> err;
        for (int n : {128, 256, 512}) {
            const auto g = embed_profile(solve_profile(eps, n), Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 16, 1);
            err.push_back((surface_geometry(g).mean_curvature.array() - 1).abs().maxCoeff());
        }
        EXPECT_GE(std::log2(err[0] / err[1]), 1.9) << "eps=" << eps;
        EXPECT_GE(std::log2(err[1] / err[2]), 1.9) << "eps=" << eps;
    }
}

TEST(SurfaceGeometry, RejectsNonPositiveRadius)
{
    auto g = embed_profile(solve_profile(0.5, 64), Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), 16, 1);
    g.rho(3, 3) = 0.0;
    EXPECT_THROW(surface_geometry(g), DomainError);
}

TEST(NeighborGraph, ZeroAndCylinderCases)
{
    for (double u : delaunay_neighbor_graph(0.6, 0.0, 32))
        EXPECT_EQ(u, 0.0);
    // Cylinder normals are radial: at the neck of D_0.7 the height is 0.7 - 1.
    EXPECT_NEAR(delaunay_neighbor_graph(1.0, -0.3, 32)[0], -0.3, 1e-12);
    EXPECT_THROW(delaunay_neighbor_graph(0.6, 0.5, 32), DomainError);
}
