#include <cmc/end_fit.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cmc;

namespace {

constexpr double pi = std::numbers::pi;

double axis_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b)
{
    return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

Frame tilted_frame(double degrees)
{
    const double a = degrees * pi / 180;
    return Frame::from_axis(Eigen::Vector3d(0.4, -0.3, 1.1), Eigen::Vector3d(std::sin(a) * 0.6, std::sin(a) * 0.8, std::cos(a)));
}

} // namespace

TEST(FitEnd, ExactDelaunayEnds)
{
    for (double eps : {0.2, 0.6, 1.0}) {
        const auto frame = tilted_frame(0);
        const auto g = perturbed_delaunay_end(eps, frame, 16, 0.04, 16, 0.0, 1.0);
        const auto fit = fit_end(sample_from_graph(g));
        EXPECT_EQ(fit.status, FitStatus::exact) << "eps=" << eps;
        EXPECT_NEAR(fit.epsilon, eps, 1e-6);
        EXPECT_LE(axis_angle(fit.axis_direction, frame.a), 1e-4);
        EXPECT_TRUE(std::isnan(fit.decay_rate));
    }
}

TEST(FitEnd, TiltedAxis)
{
    const auto frame = tilted_frame(20);
    const auto g = perturbed_delaunay_end(0.6, frame, 16, 0.04, 16, 0.0, 1.0);
    const auto fit = fit_end(sample_from_graph(g));
    EXPECT_NEAR(fit.epsilon, 0.6, 1e-6);
    EXPECT_LE(axis_angle(fit.axis_direction, frame.a), 1e-4);
    // The fitted axis passes through the true axis.
    const Eigen::Vector3d d = fit.axis_point - frame.origin;
    EXPECT_LE((d - d.dot(frame.a) * frame.a).norm(), 1e-6);
}

TEST(FitEnd, ExponentiallyPerturbedEnd)
{
    const auto frame = tilted_frame(0);
    const auto g = perturbed_delaunay_end(0.6, frame, 16, 0.04, 16, 0.05, 1.2);
    const auto fit = fit_end(sample_from_graph(g));
    EXPECT_EQ(fit.status, FitStatus::accepted);
    EXPECT_NEAR(fit.epsilon, 0.6, 1e-3);
    EXPECT_NEAR(fit.decay_rate, 1.2, 0.05 * 1.2);
    EXPECT_GE(fit.r2, 0.9);

    const auto rep = asymptote_validate(g, fit);
    EXPECT_EQ(rep.status, FitStatus::accepted);
    EXPECT_NEAR(rep.decay_rate, 1.2, 0.1 * 1.2);
}

TEST(FitEnd, OtherDecayRates)
{
    for (double rate : {0.8, 1.6}) {
        const auto g = perturbed_delaunay_end(0.5, tilted_frame(10), 16, 0.04, 16, 0.05, rate);
        const auto fit = fit_end(sample_from_graph(g));
        EXPECT_EQ(fit.status, FitStatus::accepted) << "rate=" << rate;
        EXPECT_NEAR(fit.decay_rate, rate, 0.05 * rate);
    }
}

TEST(FitEnd, NonDecayingPerturbationIsRejected)
{
    const auto g = perturbed_delaunay_end(0.6, tilted_frame(0), 16, 0.04, 16, 0.05, 0.0);
    const auto fit = fit_end(sample_from_graph(g));
    EXPECT_EQ(fit.status, FitStatus::rejected);
    EXPECT_EQ(asymptote_validate(g, fit).status, FitStatus::rejected);
}

TEST(FitEnd, RigidMotionEquivariance)
{
    const auto g0 = perturbed_delaunay_end(0.6, tilted_frame(0), 16, 0.04, 16, 0.05, 1.2);
    auto g1 = g0;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, -2, 0.5).normalized()).toRotationMatrix();
    const Eigen::Vector3d shift(3, -1, 2);
    g1.frame.origin = r * g0.frame.origin + shift;
    g1.frame.a = r * g0.frame.a;
    g1.frame.b = r * g0.frame.b;
    g1.frame.c = r * g0.frame.c;
    const auto f0 = fit_end(sample_from_graph(g0)), f1 = fit_end(sample_from_graph(g1));
    EXPECT_NEAR(f0.epsilon, f1.epsilon, 1e-8);
    EXPECT_NEAR(f0.decay_rate, f1.decay_rate, 1e-4);
    EXPECT_LE(axis_angle(r * f0.axis_direction, f1.axis_direction), 1e-8);
}

TEST(FitEnd, WindowRestrictsSample)
{
    const auto g = perturbed_delaunay_end(0.4, tilted_frame(0), 24, 0.04, 16, 0.0, 1.0);
    EndSample s = sample_from_graph(g);
    s.window = std::pair{4.0, 20.0};
    const auto fit = fit_end(s);
    EXPECT_NEAR(fit.epsilon, 0.4, 1e-6);
    EXPECT_LE(fit.t_max, 16.0 + 1e-6);
}

TEST(FitEnd, LongerWindowNeverWorse)
{
    const auto g = perturbed_delaunay_end(0.3, tilted_frame(15), 28, 0.04, 16, 0.0, 1.0);
    double prev = 1.0;
    for (double len : {14.0, 18.0, 22.0, 26.0}) {
        EndSample s = sample_from_graph(g);
        s.window = std::pair{0.0, len};
        const double err = std::abs(fit_end(s).epsilon - 0.3);
        EXPECT_LE(err, prev + 1e-12) << "window " << len;
        prev = err;
    }
}

TEST(FitEnd, Errors)
{
    // shorter than two periods
    const auto g = perturbed_delaunay_end(0.6, tilted_frame(0), 8, 0.04, 16, 0.0, 1.0);
    EXPECT_THROW(fit_end(sample_from_graph(g)), FitError);
    // too few points
    EndSample few;
    for (int i = 0; i < 20; ++i)
        few.points.emplace_back(std::cos(i), std::sin(i), 0.5 * i);
    EXPECT_THROW(fit_end(few), FitError);
    // a flat disc has no distinguished axis
    EndSample disc;
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j)
            disc.points.emplace_back(std::cos(2 * pi * j / 40) * (1 + i), std::sin(2 * pi * j / 40) * (1 + i), 0.0);
    EXPECT_THROW(fit_end(disc), FitError);
}

TEST(AsymptoteValidate, ExactInputAtNoiseFloor)
{
    const auto g = perturbed_delaunay_end(0.6, tilted_frame(0), 16, 0.04, 16, 0.0, 1.0);
    const auto rep = asymptote_validate(g, fit_end(sample_from_graph(g)));
    EXPECT_LE(rep.max_deviation, 1e-8);
    EXPECT_EQ(rep.status, FitStatus::exact);
}
