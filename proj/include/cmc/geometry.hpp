#pragma once

// Differential geometry of surfaces sampled on a (t, theta) grid.
//
// t-derivatives are second-order finite differences; theta-derivatives are
// Fourier-spectral (the grid is always periodic in theta). A grid may also
// close on itself in t with a constant translation, which covers tiled
// Delaunay periods and one-period normal graphs.

#include <cmc/delaunay.hpp>
#include <cmc/errors.hpp>
#include <cmc/frame.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace cmc {

using Grid = Eigen::MatrixXd; ///< rows index t, columns index theta

/// Fourier differentiation matrices on n equispaced points of [0, 2pi), n even.
struct SpectralDiff {
    Eigen::MatrixXd d1;
    Eigen::MatrixXd d2;

    explicit SpectralDiff(Eigen::Index n) : d1(n, n), d2(n, n)
    {
        detail::require(n >= 4 && n % 2 == 0, "spectral differentiation needs an even number of theta points");
        const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index k = 0; k < n; ++k) {
                if (j == k) {
                    d1(j, k) = 0.0;
                    d2(j, k) = -std::numbers::pi * std::numbers::pi / (3.0 * h * h) - 1.0 / 6.0;
                    continue;
                }
                const double sign = ((j - k) % 2 == 0) ? 1.0 : -1.0;
                const double x = 0.5 * h * static_cast<double>(j - k);
                d1(j, k) = 0.5 * sign / std::tan(x);
                d2(j, k) = -0.5 * sign / (std::sin(x) * std::sin(x));
            }
        }
    }

    static const SpectralDiff& get(Eigen::Index n)
    {
        static std::mutex m;
        static std::map<Eigen::Index, SpectralDiff> cache;
        std::lock_guard lock(m);
        auto it = cache.find(n);
        if (it == cache.end())
            it = cache.emplace(n, SpectralDiff(n)).first;
        return it->second;
    }
};

/// d/dtheta along rows.
inline Grid theta_derivative(const Grid& f) { return f * SpectralDiff::get(f.cols()).d1.transpose(); }
inline Grid theta_second_derivative(const Grid& f) { return f * SpectralDiff::get(f.cols()).d2.transpose(); }

/// How a grid function continues past the first and last t rows.
struct TClosure {
    bool periodic = false;
    /// f(row + n) = f(row) + shift, for periodic closures.
    double shift = 0.0;
};

/// First t-derivative, central in the interior, second-order one-sided at
/// open ends.
inline Grid t_derivative(const Grid& f, double h, TClosure closure = {})
{
    const Eigen::Index n = f.rows();
    detail::require(n >= 3, "t_derivative: need at least 3 rows");
    Grid d(n, f.cols());
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        d.row(i) = (f.row(i + 1) - f.row(i - 1)) / (2.0 * h);
    if (closure.periodic) {
        d.row(0) = (f.row(1) - (f.row(n - 1).array() - closure.shift).matrix()) / (2.0 * h);
        d.row(n - 1) = ((f.row(0).array() + closure.shift).matrix() - f.row(n - 2)) / (2.0 * h);
    } else {
        d.row(0) = (-3.0 * f.row(0) + 4.0 * f.row(1) - f.row(2)) / (2.0 * h);
        d.row(n - 1) = (3.0 * f.row(n - 1) - 4.0 * f.row(n - 2) + f.row(n - 3)) / (2.0 * h);
    }
    return d;
}

inline Grid t_second_derivative(const Grid& f, double h, TClosure closure = {})
{
    const Eigen::Index n = f.rows();
    detail::require(n >= 4, "t_second_derivative: need at least 4 rows");
    Grid d(n, f.cols());
    const double h2 = h * h;
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        d.row(i) = (f.row(i + 1) - 2.0 * f.row(i) + f.row(i - 1)) / h2;
    if (closure.periodic) {
        d.row(0) = (f.row(1) - 2.0 * f.row(0) + (f.row(n - 1).array() - closure.shift).matrix()) / h2;
        d.row(n - 1) = ((f.row(0).array() + closure.shift).matrix() - 2.0 * f.row(n - 1) + f.row(n - 2)) / h2;
    } else {
        d.row(0) = (2.0 * f.row(0) - 5.0 * f.row(1) + 4.0 * f.row(2) - f.row(3)) / h2;
        d.row(n - 1) = (2.0 * f.row(n - 1) - 5.0 * f.row(n - 2) + 4.0 * f.row(n - 3) - f.row(n - 4)) / h2;
    }
    return d;
}

/// A parametrized surface sampled on a (t, theta) grid: one grid per
/// Cartesian coordinate. With periodic_t, x(row + n) = x(row) + period_shift.
struct SurfaceGrid {
    Frame frame;
    double dt = 0.0;
    std::array<Grid, 3> x;
    bool periodic_t = false;
    Eigen::Vector3d period_shift = Eigen::Vector3d::Zero();

    Eigen::Index n_t() const { return x[0].rows(); }
    Eigen::Index n_theta() const { return x[0].cols(); }
    double theta(Eigen::Index j) const
    {
        return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_theta());
    }
    Eigen::Vector3d point(Eigen::Index i, Eigen::Index j) const { return {x[0](i, j), x[1](i, j), x[2](i, j)}; }
};

inline SurfaceGrid to_surface_grid(const CylindricalGraph& g)
{
    detail::require((g.rho.array() > 0.0).all(), "cylindrical graph needs rho > 0 everywhere");
    detail::require(g.n_theta() >= 8, "cylindrical graph needs at least 8 theta points");
    SurfaceGrid s;
    s.frame = g.frame;
    s.dt = g.dt;
    s.periodic_t = g.periodic_t;
    s.period_shift = static_cast<double>(g.n_t()) * g.dt * g.frame.a;
    for (auto& c : s.x)
        c.resize(g.n_t(), g.n_theta());
    for (Eigen::Index i = 0; i < g.n_t(); ++i)
        for (Eigen::Index j = 0; j < g.n_theta(); ++j) {
            const Eigen::Vector3d p = g.point(i, j);
            for (int k = 0; k < 3; ++k)
                s.x[static_cast<std::size_t>(k)](i, j) = p[k];
        }
    return s;
}

/// Pointwise geometry. Curvatures use the outward normal, so the unit
/// cylinder has kappa = (0, 1) and H = kappa1 + kappa2 = 1.
struct SurfaceGeometry {
    Grid metric_tt, metric_ttheta, metric_thetatheta;
    std::array<Grid, 3> normal;
    Grid kappa1, kappa2;
    Grid mean_curvature;
    Grid second_form_norm_sq;
    Grid steepness;
};

inline SurfaceGeometry surface_geometry(const SurfaceGrid& s)
{
    const Eigen::Index nt = s.n_t(), nth = s.n_theta();
    detail::require(nth >= 4 && nth % 2 == 0, "surface_geometry: n_theta must be even");
    std::array<Grid, 3> xt, xtt, xth, xthth, xtth;
    for (std::size_t k = 0; k < 3; ++k) {
        const TClosure cl{s.periodic_t, s.period_shift[static_cast<Eigen::Index>(k)]};
        xt[k] = t_derivative(s.x[k], s.dt, cl);
        xtt[k] = t_second_derivative(s.x[k], s.dt, cl);
        xth[k] = theta_derivative(s.x[k]);
        xthth[k] = theta_second_derivative(s.x[k]);
        xtth[k] = theta_derivative(xt[k]);
    }

    SurfaceGeometry g;
    for (Grid* m : {&g.metric_tt, &g.metric_ttheta, &g.metric_thetatheta, &g.kappa1, &g.kappa2, &g.mean_curvature,
                    &g.second_form_norm_sq, &g.steepness})
        m->resize(nt, nth);
    for (auto& c : g.normal)
        c.resize(nt, nth);

    auto vec = [](const std::array<Grid, 3>& a, Eigen::Index i, Eigen::Index j) {
        return Eigen::Vector3d(a[0](i, j), a[1](i, j), a[2](i, j));
    };

    for (Eigen::Index i = 0; i < nt; ++i) {
        for (Eigen::Index j = 0; j < nth; ++j) {
            const Eigen::Vector3d ft = vec(xt, i, j), fth = vec(xth, i, j);
            const double e = ft.dot(ft), f = ft.dot(fth), gg = fth.dot(fth);
            const double det = e * gg - f * f;
            Eigen::Vector3d nu = fth.cross(ft);
            const double nn = nu.norm();
            if (!(det > 0.0) || !(nn > 0.0))
                throw DomainError("surface_geometry: degenerate parametrization");
            nu /= nn;
            const double l = vec(xtt, i, j).dot(nu);
            const double m = vec(xtth, i, j).dot(nu);
            const double n = vec(xthth, i, j).dot(nu);
            const double h = -(l * gg - 2.0 * m * f + n * e) / det;
            const double k = (l * n - m * m) / det;
            const double disc = std::sqrt(std::max(0.0, 0.25 * h * h - k));

            g.metric_tt(i, j) = e;
            g.metric_ttheta(i, j) = f;
            g.metric_thetatheta(i, j) = gg;
            for (int c = 0; c < 3; ++c)
                g.normal[static_cast<std::size_t>(c)](i, j) = nu[c];
            g.mean_curvature(i, j) = h;
            g.kappa1(i, j) = 0.5 * h - disc;
            g.kappa2(i, j) = 0.5 * h + disc;
            g.second_form_norm_sq(i, j) = h * h - 2.0 * k;
            g.steepness(i, j) = 1.0 / nu.dot(s.frame.omega(s.theta(j)));
        }
    }
    return g;
}

inline SurfaceGeometry surface_geometry(const CylindricalGraph& graph) { return surface_geometry(to_surface_grid(graph)); }

} // namespace cmc
