#pragma once

// Delaunay profiles: periodic solutions of the rotationally symmetric
// H = 1 equation written as a cylindrical graph rho(t) about a fixed axis.

#include <cmc/errors.hpp>
#include <cmc/frame.hpp>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace cmc {

/// Smallest supported neck radius. Below this the profile approaches the
/// string-of-spheres limit and the neck curvature is no longer resolvable.
inline constexpr double min_neck = 1e-3;

/// Neck radius of a Delaunay surface, 0 < epsilon <= 1 (1 is the unit cylinder).
class DelaunayParameter {
public:
    explicit DelaunayParameter(double epsilon) : value_(epsilon)
    {
        if (!(epsilon > 0.0) || epsilon > 1.0)
            throw DomainError("Delaunay parameter must lie in (0, 1], got " + std::to_string(epsilon));
        if (epsilon < min_neck)
            throw DomainError("Delaunay parameter below supported minimum 1e-3: " + std::to_string(epsilon));
    }

    double value() const { return value_; }
    bool is_cylinder() const { return value_ == 1.0; }

private:
    double value_;
};

struct ProfileSample {
    double t;
    double rho;
    double rho_t;
};

/// rho and its first two t-derivatives at one point of a profile.
struct ProfileState {
    double rho;
    double rho_t;
    double rho_tt;
};

/// Right-hand side of the profile ODE: rho_tt = v^3 (1/(rho v) - 1), v = sqrt(1 + rho_t^2).
inline double profile_acceleration(double rho, double rho_t)
{
    const double v = std::sqrt(1.0 + rho_t * rho_t);
    return v * v * v * (1.0 / (rho * v) - 1.0);
}

/// First integral of the profile ODE, E = rho/v - rho^2/2.
inline double conserved_energy(double rho, double rho_t)
{
    detail::require(rho > 0.0, "conserved_energy: rho must be positive");
    return rho / std::sqrt(1.0 + rho_t * rho_t) - 0.5 * rho * rho;
}

/// Maximum bulge, paired with the neck through equal energy: mu = 2 - epsilon.
inline double bulge_of(DelaunayParameter epsilon) { return 2.0 - epsilon.value(); }

inline double bulge_of(double epsilon)
{
    detail::require(epsilon > 0.0 && epsilon <= 1.0, "bulge_of: epsilon must lie in (0, 1]");
    return 2.0 - epsilon;
}

/// Neck of the extremal asymptotic Delaunay end of the maximally symmetric
/// k-ended surfaces: epsilon / mu(epsilon) = 1/(k-1), so epsilon = 2/k.
inline double extremal_neck(int k_ends)
{
    detail::require(k_ends >= 3, "extremal_neck: need at least 3 ends");
    return 2.0 / static_cast<double>(k_ends);
}

/// One period of a Delaunay profile, uniformly sampled from the neck.
///
/// Samples sit at t_j = j * period / n for j = 0..n-1; the grid is periodic
/// and does not repeat the endpoint. Between samples, at() uses quintic
/// Hermite interpolation with rho_tt supplied by the ODE, which is accurate
/// to O(h^6) on dense grids.
class DelaunayProfile {
public:
    DelaunayProfile(DelaunayParameter epsilon, double period, std::vector<ProfileSample> samples, double bulge)
        : epsilon_(epsilon), period_(period), samples_(std::move(samples)), bulge_(bulge)
    {
        detail::require(period_ > 0.0, "DelaunayProfile: period must be positive");
        detail::require(samples_.size() >= 2, "DelaunayProfile: need at least two samples");
        energy_ = conserved_energy(samples_.front().rho, samples_.front().rho_t);
    }

    DelaunayParameter epsilon() const { return epsilon_; }
    double period() const { return period_; }
    double energy() const { return energy_; }
    double bulge() const { return bulge_; }
    const std::vector<ProfileSample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    double spacing() const { return period_ / static_cast<double>(samples_.size()); }

    ProfileState sample_state(std::size_t j) const
    {
        const auto& s = samples_[j % samples_.size()];
        return {s.rho, s.rho_t, profile_acceleration(s.rho, s.rho_t)};
    }

    /// Periodic evaluation at arbitrary t.
    ProfileState at(double t) const
    {
        const double h = spacing();
        double u = std::fmod(t, period_);
        if (u < 0.0)
            u += period_;
        auto i = static_cast<std::size_t>(std::floor(u / h));
        if (i >= samples_.size())
            i = samples_.size() - 1;
        const double s = u / h - static_cast<double>(i);
        const ProfileState a = sample_state(i);
        const ProfileState b = sample_state(i + 1);

        const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
        const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
        const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5;
        const double h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        const double h3 = 0.5 * s3 - s4 + 0.5 * s5;
        const double h4 = -4 * s3 + 7 * s4 - 3 * s5;
        const double h5 = 10 * s3 - 15 * s4 + 6 * s5;

        const double d0 = -30 * s2 + 60 * s3 - 30 * s4;
        const double d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
        const double d2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
        const double d3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
        const double d4 = -12 * s2 + 28 * s3 - 15 * s4;
        const double d5 = 30 * s2 - 60 * s3 + 30 * s4;

        const double rho = a.rho * h0 + h * a.rho_t * h1 + h * h * a.rho_tt * h2 + b.rho * h5 + h * b.rho_t * h4 +
                           h * h * b.rho_tt * h3;
        const double rho_t = (a.rho * d0 + b.rho * d5) / h + a.rho_t * d1 + b.rho_t * d4 +
                             h * (a.rho_tt * d2 + b.rho_tt * d3);
        return {rho, rho_t, profile_acceleration(rho, rho_t)};
    }

    double min_rho() const
    {
        double m = samples_.front().rho;
        for (const auto& s : samples_)
            m = std::min(m, s.rho);
        return m;
    }

    double max_rho() const
    {
        double m = samples_.front().rho;
        for (const auto& s : samples_)
            m = std::max(m, s.rho);
        return m;
    }

private:
    DelaunayParameter epsilon_;
    double period_;
    std::vector<ProfileSample> samples_;
    double bulge_;
    double energy_ = 0.0;
};

struct ProfileOptions {
    /// Largest t searched for the second neck before giving up.
    double t_horizon = 200.0;
};

namespace detail {

using ProfileVec = std::array<double, 2>;

struct ProfileRhs {
    void operator()(const ProfileVec& y, ProfileVec& dy, double /*t*/) const
    {
        dy[0] = y[1];
        dy[1] = profile_acceleration(y[0], y[1]);
    }
};

inline auto make_profile_stepper(double tol)
{
    namespace ode = boost::numeric::odeint;
    const double t = 1e-3 * tol;
    return ode::make_controlled(t, t, ode::runge_kutta_fehlberg78<ProfileVec>());
}

/// Integrate y from t0 to t1 (either direction) at the given tolerance.
inline ProfileVec advance_profile(ProfileVec y, double t0, double t1, double tol)
{
    namespace ode = boost::numeric::odeint;
    if (t1 == t0)
        return y;
    auto stepper = make_profile_stepper(tol);
    const double dt = (t1 > t0 ? 1.0 : -1.0) * std::min(0.01, std::abs(t1 - t0));
    try {
        ode::integrate_adaptive(stepper, ProfileRhs{}, y, t0, t1, dt);
    } catch (const std::exception& e) {
        throw NumericError(std::string("profile integration failed: ") + e.what());
    }
    if (!(y[0] > 0.0) || !std::isfinite(y[1]))
        throw NumericError("profile integration left the region rho > 0");
    return y;
}

/// Half period: time from the neck to the first bulge (rho_t returns to 0 from above).
/// A full period is then the second return to the neck state, located the same way.
inline double locate_period(double epsilon, double tol, const ProfileOptions& opt)
{
    namespace ode = boost::numeric::odeint;
    auto stepper = make_profile_stepper(tol);
    ProfileVec y{epsilon, 0.0};
    double t = 0.0;
    double dt = 1e-3 * epsilon;
    int crossings = 0;
    double event_t = 0.0;
    while (t < opt.t_horizon) {
        const ProfileVec y_prev = y;
        const double t_prev = t;
        int fails = 0;
        while (stepper.try_step(ProfileRhs{}, y, t, dt) == ode::fail) {
            if (++fails > 500)
                throw NumericError("profile integrator could not complete a step");
        }
        if (!(y[0] > 0.0) || !std::isfinite(y[1]))
            throw NumericError("profile integration left the region rho > 0");
        // Crossing at bulge goes + to -, at neck - to +.
        const bool down = y_prev[1] > 0.0 && y[1] <= 0.0;
        const bool up = y_prev[1] < 0.0 && y[1] >= 0.0 && t_prev > 0.0;
        if (down || up) {
            auto rho_t_at = [&](double s) { return advance_profile(y_prev, t_prev, s, tol)[1]; };
            boost::uintmax_t iters = 200;
            auto term = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(a)); };
            const double fa = y_prev[1];
            const double fb = y[1];
            double root;
            if (fb == 0.0) {
                root = t;
            } else {
                auto bracket = boost::math::tools::toms748_solve(rho_t_at, t_prev, t, fa, fb, term, iters);
                root = 0.5 * (bracket.first + bracket.second);
            }
            ++crossings;
            if (crossings == 2) {
                event_t = root;
                return event_t;
            }
        }
    }
    throw DetectionError("period not found within t-horizon " + std::to_string(opt.t_horizon));
}

} // namespace detail

/// Integrate the profile ODE from the neck state (epsilon, 0) over one full
/// period and resample it onto n_samples uniform points.
///
/// The period is the time of the second zero of rho_t after the neck (the
/// first is the bulge). At epsilon = 1 the solution is the constant cylinder
/// and the period is taken as 2*pi, the period of the linearized oscillation.
inline DelaunayProfile solve_profile(DelaunayParameter epsilon, std::size_t n_samples, double tol = 1e-10,
                                     const ProfileOptions& opt = {})
{
    detail::require(n_samples >= 16, "solve_profile: need at least 16 samples");
    detail::require(tol > 0.0, "solve_profile: tolerance must be positive");
    const double eps = epsilon.value();
    std::vector<ProfileSample> samples(n_samples);

    if (epsilon.is_cylinder()) {
        const double period = 2.0 * std::numbers::pi;
        for (std::size_t j = 0; j < n_samples; ++j)
            samples[j] = {period * static_cast<double>(j) / static_cast<double>(n_samples), 1.0, 0.0};
        return DelaunayProfile(epsilon, period, std::move(samples), 1.0);
    }

    const double period = detail::locate_period(eps, tol, opt);
    const double h = period / static_cast<double>(n_samples);

    detail::ProfileVec y{eps, 0.0};
    double t = 0.0;
    samples[0] = {0.0, eps, 0.0};
    for (std::size_t j = 1; j < n_samples; ++j) {
        const double tj = h * static_cast<double>(j);
        y = detail::advance_profile(y, t, tj, tol);
        t = tj;
        samples[j] = {tj, y[0], y[1]};
    }

    const double bulge = detail::advance_profile({eps, 0.0}, 0.0, 0.5 * period, tol)[0];
    return DelaunayProfile(epsilon, period, std::move(samples), bulge);
}

inline DelaunayProfile solve_profile(double epsilon, std::size_t n_samples, double tol = 1e-10,
                                     const ProfileOptions& opt = {})
{
    return solve_profile(DelaunayParameter(epsilon), n_samples, tol, opt);
}

/// Cylindrical graph F(t, theta) = origin + t a + rho(t, theta) omega(theta)
/// over a uniform (t, theta) grid; rho is stored as rows = t, cols = theta.
struct CylindricalGraph {
    Frame frame;
    double t0 = 0.0;
    double dt = 0.0;
    Eigen::MatrixXd rho;
    /// When set, the t grid spans whole periods and closes on itself with an
    /// axial shift of rows * dt.
    bool periodic_t = false;

    Eigen::Index n_t() const { return rho.rows(); }
    Eigen::Index n_theta() const { return rho.cols(); }
    double t(Eigen::Index i) const { return t0 + dt * static_cast<double>(i); }
    double theta(Eigen::Index j) const
    {
        return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_theta());
    }
    Eigen::Vector3d omega(Eigen::Index j) const { return frame.omega(theta(j)); }
    Eigen::Vector3d point(Eigen::Index i, Eigen::Index j) const
    {
        return frame.origin + t(i) * frame.a + rho(i, j) * omega(j);
    }
};

/// Tile a profile n_periods times along an axis. rho is independent of theta.
inline CylindricalGraph embed_profile(const DelaunayProfile& profile, const Eigen::Vector3d& axis_point,
                                      const Eigen::Vector3d& axis_direction, int n_theta, int n_periods)
{
    detail::require(n_theta >= 8, "embed_profile: need n_theta >= 8");
    detail::require(n_periods >= 1, "embed_profile: need at least one period");
    CylindricalGraph g;
    g.frame = Frame::from_axis(axis_point, axis_direction);
    g.t0 = 0.0;
    g.dt = profile.spacing();
    g.periodic_t = true;
    const auto n = static_cast<Eigen::Index>(profile.size());
    g.rho.resize(n * n_periods, n_theta);
    for (Eigen::Index i = 0; i < g.rho.rows(); ++i)
        g.rho.row(i).setConstant(profile.samples()[static_cast<std::size_t>(i % n)].rho);
    return g;
}

} // namespace cmc
