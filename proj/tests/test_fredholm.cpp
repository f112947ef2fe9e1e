#include <cmc/fredholm.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace cmc;

TEST(IndicialRoots, LowModes)
{
    const auto r0 = indicial_roots(0);
    EXPECT_TRUE(r0.on_real_line);
    ASSERT_EQ(r0.roots.size(), 2u);
    EXPECT_EQ(r0.roots[0], std::complex<double>(1.0));
    EXPECT_EQ(r0.roots[1], std::complex<double>(-1.0));
    EXPECT_EQ(r0.ranks, (std::vector<int>{1, 1}));

    const auto r1 = indicial_roots(1);
    EXPECT_TRUE(r1.on_real_line);
    EXPECT_EQ(r1.rank(), 4);

    const auto r2 = indicial_roots(2);
    EXPECT_FALSE(r2.on_real_line);
    EXPECT_EQ(r2.rank(), 0);
    EXPECT_NEAR(r2.roots[0].imag(), std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(r2.roots[1].imag(), -std::sqrt(3.0), 1e-15);
    EXPECT_THROW(indicial_roots(-1), DomainError);
}

TEST(IndicialRoots, PolesAnnihilateModeSymbol)
{
    // I(zeta) on mode m is 1 - m^2 - zeta^2.
    for (int m = 0; m <= 8; ++m)
        for (const auto z : indicial_roots(m).roots)
            EXPECT_NEAR(std::abs(1.0 - m * m - z * z), 0.0, 1e-12);
}

TEST(IndexCounts, ExactIntegers)
{
    EXPECT_EQ(relative_index(2), 12);
    EXPECT_EQ(relative_index(3), 18);
    EXPECT_EQ(relative_index(5), 30);
    EXPECT_EQ(bounded_nullspace_dim(2), 6);
    EXPECT_EQ(bounded_nullspace_dim(3), 9);
    EXPECT_EQ(bounded_nullspace_dim(4), 12);
    for (int k = 2; k <= 20; ++k) {
        EXPECT_EQ(relative_index(k), 6 * k);
        EXPECT_EQ(bounded_nullspace_dim(k), 3 * k);
        EXPECT_EQ(moduli_dimension(k, Ambient::hyperbolic, 0), k == 2 ? 1 : k);
        EXPECT_EQ(moduli_dimension(k, Ambient::euclidean3, 0), k == 2 ? 1 : 3 * k - 6);
    }
    EXPECT_EQ(rank_sum_per_end(8), 6);
    EXPECT_THROW(relative_index(1), DomainError);
    EXPECT_THROW(bounded_nullspace_dim(0), DomainError);
}

TEST(ModuliDimension, Examples)
{
    EXPECT_EQ(moduli_dimension(3, Ambient::euclidean3, 0), 3);
    EXPECT_EQ(moduli_dimension(2, Ambient::euclidean3, 2), 1);
    EXPECT_EQ(moduli_dimension(4, Ambient::hyperbolic, 0), 4);
    EXPECT_THROW(moduli_dimension(3, Ambient::euclidean3, 1), DomainError);
    EXPECT_THROW(moduli_dimension(1, Ambient::hyperbolic, 0), DomainError);
}

TEST(GammaWeights, CylinderClosedForm)
{
    const auto g = gamma_weights(solve_profile(1.0, 256), 3);
    ASSERT_EQ(g.size(), 5u);
    const double s3 = std::sqrt(3.0), s8 = std::sqrt(8.0);
    const std::vector<double> want{-s8, -s3, 0.0, s3, s8};
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_NEAR(g[i], want[i], 1e-6);
}

TEST(GammaWeights, ContainsZeroAndIsSymmetric)
{
    for (double eps : {0.2, 0.5, 0.8}) {
        const auto g = gamma_weights(solve_profile(eps, 256), 4);
        EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
        EXPECT_TRUE(std::find(g.begin(), g.end(), 0.0) != g.end()) << "eps=" << eps;
        for (std::size_t i = 0; i < g.size(); ++i)
            EXPECT_NEAR(g[i], -g[g.size() - 1 - i], 1e-6);
    }
}

TEST(IndexReport, ThreeEnds)
{
    const auto r = index_report(3, solve_profile(1.0, 128));
    EXPECT_EQ(r.relative_index, 18);
    EXPECT_EQ(r.bounded_nullspace_dim, 9);
    EXPECT_EQ(r.moduli_dim_euclidean, 3);
    EXPECT_EQ(r.moduli_dim_hyperbolic, 3);
    EXPECT_EQ(r.l2_nullspace_dim_assumed, 0);
    EXPECT_EQ(r.gamma.size(), 5u);
}
