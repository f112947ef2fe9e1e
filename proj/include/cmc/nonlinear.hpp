#pragma once

// The mean-curvature operator N(phi) = 2 (H_phi - 1) for normal graphs over
// one period of a Delaunay surface, and a gauge-fixed Newton solver for
// N(phi) = 0.

#include <cmc/delaunay.hpp>
#include <cmc/errors.hpp>
#include <cmc/frame.hpp>
#include <cmc/geometry.hpp>
#include <cmc/jacobi.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace cmc {

/// phi on the (t, theta) grid of one base period, periodic in both directions.
///
/// The base is the profile tiled along frame.a, optionally stretched along
/// the axis by axial_scale; the perturbed surface is x + phi(x) nu(x) with nu
/// the outward unit normal of the (stretched) base.
struct NormalGraphField {
    DelaunayProfile base;
    Frame frame = Frame::from_axis(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
    double axial_scale = 1.0;
    Grid phi;

    static NormalGraphField zero(const DelaunayProfile& base, Eigen::Index n_theta, double axial_scale = 1.0)
    {
        detail::require(n_theta >= 8 && n_theta % 2 == 0, "NormalGraphField: n_theta must be even and >= 8");
        detail::require(axial_scale > 0.0, "NormalGraphField: axial scale must be positive");
        NormalGraphField f{base, Frame::from_axis(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ()), axial_scale,
                           Grid::Zero(static_cast<Eigen::Index>(base.size()), n_theta)};
        return f;
    }

    Eigen::Index n_t() const { return phi.rows(); }
    Eigen::Index n_theta() const { return phi.cols(); }
    double theta(Eigen::Index j) const
    {
        return 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_theta());
    }
    /// Axial length of one period of the (stretched) base.
    double axial_period() const { return axial_scale * base.period(); }
};

namespace detail {

inline void check_field(const NormalGraphField& f)
{
    require(f.n_t() == static_cast<Eigen::Index>(f.base.size()), "NormalGraphField: phi rows must match the base samples");
    require(f.n_theta() >= 8 && f.n_theta() % 2 == 0, "NormalGraphField: n_theta must be even and >= 8");
    require(f.phi.allFinite(), "NormalGraphField: phi is not finite");
}

} // namespace detail

/// Smallest distance to the axis over the perturbed surface.
inline double min_axis_distance(const NormalGraphField& f)
{
    detail::check_field(f);
    const double lam = f.axial_scale;
    double r = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < f.n_t(); ++i) {
        const auto& s = f.base.samples()[static_cast<std::size_t>(i)];
        const double w = std::hypot(lam, s.rho_t);
        for (Eigen::Index j = 0; j < f.n_theta(); ++j)
            r = std::min(r, s.rho + f.phi(i, j) * lam / w);
    }
    return r;
}

/// Perturbed embedding x + phi nu as a surface grid closing on itself after
/// one period.
inline SurfaceGrid perturbed_surface(const NormalGraphField& f)
{
    detail::check_field(f);
    const Eigen::Index nt = f.n_t(), nth = f.n_theta();
    const double lam = f.axial_scale;
    SurfaceGrid s;
    s.frame = f.frame;
    s.dt = f.base.spacing();
    s.periodic_t = true;
    s.period_shift = f.axial_period() * f.frame.a;
    for (auto& c : s.x)
        c.resize(nt, nth);
    for (Eigen::Index i = 0; i < nt; ++i) {
        const auto& p = f.base.samples()[static_cast<std::size_t>(i)];
        const double w = std::hypot(lam, p.rho_t);
        const double z = lam * p.t;
        for (Eigen::Index j = 0; j < nth; ++j) {
            const double ph = f.phi(i, j);
            const double axial = z - ph * p.rho_t / w;
            const double radial = p.rho + ph * lam / w;
            const Eigen::Vector3d x = f.frame.origin + axial * f.frame.a + radial * f.frame.omega(f.theta(j));
            for (int k = 0; k < 3; ++k)
                s.x[static_cast<std::size_t>(k)](i, j) = x[k];
        }
    }
    return s;
}

/// N(phi) = 2 (H_phi - 1) pointwise, H the sum of principal curvatures.
inline Grid residual_N(const NormalGraphField& f)
{
    if (!(min_axis_distance(f) > 0.0))
        throw DomainError("residual_N: perturbed surface meets the axis");
    const auto g = surface_geometry(perturbed_surface(f));
    return 2.0 * (g.mean_curvature.array() - 1.0).matrix();
}

/// [N(phi + s dir) - N(phi - s dir)] / (2 s).
///
/// With the outward normal and H = kappa1 + kappa2, this approximates
/// -2 (Delta + |A|^2) dir at phi = 0.
inline Grid linearize_N(const NormalGraphField& f, const Grid& direction, double step)
{
    detail::require(step > 0.0, "linearize_N: step must be positive");
    detail::require(direction.rows() == f.n_t() && direction.cols() == f.n_theta(),
                    "linearize_N: direction has the wrong shape");
    NormalGraphField plus = f, minus = f;
    plus.phi += step * direction;
    minus.phi -= step * direction;
    return (residual_N(plus) - residual_N(minus)) / (2.0 * step);
}

/// Directions removed from the periodic problem by orthogonality constraints.
///
/// Away from the cylinder the periodic kernel of L is spanned by the axial
/// translation field and the two transverse translation fields. On the unit
/// cylinder it is spanned by cos t, sin t (m = 0) and cos theta, sin theta
/// (m = 1). With relax_period the axial scale becomes an unknown, paired with
/// a constraint fixing the component along the parameter-change field.
struct GaugeSpec {
    bool fix_axial = true;
    bool fix_transverse = true;
    bool relax_period = false;
    /// Step used to build the parameter-change field when relax_period is set.
    double eta_step = 1e-3;
};

struct NewtonOptions {
    double fd_scale = 1e-6;
    int max_halvings = 20;
    double min_radius = 0.05;
};

struct NewtonReport {
    int iterations = 0;
    std::vector<double> residual_history;
    bool converged = false;
    NormalGraphField solution;
    /// Why the iteration stopped when it did not converge.
    std::string message;
};

namespace detail {

/// Area-weighted inner product weights rho vbar dt dtheta on the base grid.
inline Grid area_weights(const NormalGraphField& f)
{
    Grid w(f.n_t(), f.n_theta());
    const double dth = 2.0 * std::numbers::pi / static_cast<double>(f.n_theta());
    for (Eigen::Index i = 0; i < f.n_t(); ++i) {
        const auto& s = f.base.samples()[static_cast<std::size_t>(i)];
        w.row(i).setConstant(s.rho * std::hypot(f.axial_scale, s.rho_t) * f.base.spacing() * dth);
    }
    return w;
}

inline std::vector<Grid> gauge_fields(const NormalGraphField& f, const GaugeSpec& gauge)
{
    const Eigen::Index nt = f.n_t(), nth = f.n_theta();
    std::vector<Grid> out;
    const bool cyl = f.base.epsilon().is_cylinder();
    auto make = [&](auto fn) {
        Grid g(nt, nth);
        for (Eigen::Index i = 0; i < nt; ++i) {
            const auto& s = f.base.samples()[static_cast<std::size_t>(i)];
            const double vbar = std::sqrt(1.0 + s.rho_t * s.rho_t);
            for (Eigen::Index j = 0; j < nth; ++j)
                g(i, j) = fn(s, vbar, f.theta(j));
        }
        return g;
    };
    const double tscale = 2.0 * std::numbers::pi / f.base.period();
    if (gauge.fix_axial) {
        if (cyl) {
            out.push_back(make([&](const ProfileSample& s, double, double) { return std::cos(tscale * s.t); }));
            out.push_back(make([&](const ProfileSample& s, double, double) { return std::sin(tscale * s.t); }));
        } else {
            out.push_back(make([](const ProfileSample& s, double vbar, double) { return -s.rho_t / vbar; }));
        }
    }
    if (gauge.fix_transverse) {
        out.push_back(make([](const ProfileSample&, double vbar, double th) { return std::cos(th) / vbar; }));
        out.push_back(make([](const ProfileSample&, double vbar, double th) { return std::sin(th) / vbar; }));
    }
    return out;
}

/// Row colouring for the finite-difference Jacobian: N at row i depends on
/// phi rows i-1..i+1 only, so rows congruent modulo `colours` can be
/// perturbed together once colours >= 3 divides the periodic row count.
inline Eigen::Index row_colours(Eigen::Index n_t)
{
    for (Eigen::Index c = 3; c < n_t; ++c)
        if (n_t % c == 0)
            return c;
    return n_t;
}

inline double sup_norm(const Grid& g) { return g.cwiseAbs().maxCoeff(); }

} // namespace detail

/// Damped Newton iteration for N(phi) = 0 with gauge constraints.
///
/// Each step solves the bordered system [J C^T; C 0] [dphi; mu] = [-N; c - C phi]
/// where C holds the area-weighted gauge fields and J is a central
/// finite-difference Jacobian. With relax_period the axial scale takes the
/// place of the multiplier of the parameter-change constraint. Steps are
/// halved until the sup-norm residual decreases and the perturbed surface
/// stays at least min_radius from the axis.
inline NewtonReport newton_solve(const DelaunayProfile& base, const NormalGraphField& initial, const GaugeSpec& gauge,
                                 double tol, int max_iter, const NewtonOptions& opt = {})
{
    detail::require(tol > 0.0, "newton_solve: tol must be positive");
    detail::require(max_iter >= 0, "newton_solve: max_iter must be nonnegative");
    detail::check_field(initial);
    detail::require(initial.base.size() == base.size() && initial.base.epsilon().value() == base.epsilon().value(),
                    "newton_solve: initial field is not over the given base");

    NormalGraphField cur = initial;
    const Eigen::Index nt = cur.n_t(), nth = cur.n_theta();
    const Eigen::Index n = nt * nth;

    std::vector<Grid> psi = detail::gauge_fields(cur, gauge);
    const Grid weights = detail::area_weights(cur);
    for (auto& p : psi)
        p = p.cwiseProduct(weights);
    std::vector<double> targets(psi.size(), 0.0);
    const auto n_mult = static_cast<Eigen::Index>(psi.size());
    if (gauge.relax_period) {
        const auto basis = geometric_jacobi_fields(base, gauge.eta_step, nth);
        psi.push_back(basis.phi_0_2.field.values.cwiseProduct(weights));
        targets.push_back(psi.back().cwiseProduct(cur.phi).sum());
    }
    const auto m = static_cast<Eigen::Index>(psi.size());
    const Eigen::Index lam_col = n + n_mult;
    const Eigen::Index dim = n + m;

    auto flat = [&](Eigen::Index i, Eigen::Index j) { return i * nth + j; };
    auto constraint_gap = [&](const NormalGraphField& f) {
        double g = 0.0;
        for (std::size_t k = 0; k < psi.size(); ++k)
            g = std::max(g, std::abs(psi[k].cwiseProduct(f.phi).sum() - targets[k]));
        return g;
    };

    NewtonReport rep{0, {}, false, initial, {}};
    Grid res = residual_N(cur);
    double r = detail::sup_norm(res);
    rep.residual_history.push_back(r);

    const Eigen::Index colours = detail::row_colours(nt);
    for (int it = 0; it < max_iter; ++it) {
        if (r <= tol && constraint_gap(cur) <= tol)
            break;

        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
        const double step = opt.fd_scale * (1.0 + detail::sup_norm(cur.phi));
        for (Eigen::Index c = 0; c < colours; ++c) {
            for (Eigen::Index j = 0; j < nth; ++j) {
                NormalGraphField plus = cur, minus = cur;
                for (Eigen::Index i = c; i < nt; i += colours) {
                    plus.phi(i, j) += step;
                    minus.phi(i, j) -= step;
                }
                const Grid d = (residual_N(plus) - residual_N(minus)) / (2.0 * step);
                for (Eigen::Index i = c; i < nt; i += colours) {
                    for (Eigen::Index di = -1; di <= 1; ++di) {
                        const Eigen::Index row_t = (i + di + nt) % nt;
                        for (Eigen::Index jj = 0; jj < nth; ++jj)
                            a(flat(row_t, jj), flat(i, j)) = d(row_t, jj);
                    }
                }
            }
        }
        if (gauge.relax_period) {
            const double ls = opt.fd_scale * cur.axial_scale;
            NormalGraphField plus = cur, minus = cur;
            plus.axial_scale += ls;
            minus.axial_scale -= ls;
            const Grid d = (residual_N(plus) - residual_N(minus)) / (2.0 * ls);
            for (Eigen::Index i = 0; i < nt; ++i)
                for (Eigen::Index j = 0; j < nth; ++j)
                    a(flat(i, j), lam_col) = d(i, j);
        }

        // Gauge rows and multiplier columns carry area weights; scale each to
        // the size of the Jacobian block so the rank test is meaningful.
        const double jmax = a.topLeftCorner(n, n).cwiseAbs().maxCoeff();
        Eigen::VectorXd rhs(dim);
        for (Eigen::Index i = 0; i < nt; ++i)
            for (Eigen::Index j = 0; j < nth; ++j)
                rhs(flat(i, j)) = -res(i, j);
        for (Eigen::Index k = 0; k < m; ++k) {
            const Grid& p = psi[static_cast<std::size_t>(k)];
            const double s = jmax / p.norm();
            for (Eigen::Index i = 0; i < nt; ++i)
                for (Eigen::Index j = 0; j < nth; ++j)
                    a(n + k, flat(i, j)) = s * p(i, j);
            rhs(n + k) = s * (targets[static_cast<std::size_t>(k)] - p.cwiseProduct(cur.phi).sum());
        }
        for (Eigen::Index k = 0; k < n_mult; ++k) {
            const Grid& p = psi[static_cast<std::size_t>(k)];
            const double s = jmax / p.norm();
            for (Eigen::Index i = 0; i < nt; ++i)
                for (Eigen::Index j = 0; j < nth; ++j)
                    a(flat(i, j), n + k) = s * p(i, j);
        }
        double lam_scale = 1.0;
        if (gauge.relax_period) {
            // When stretching is a symmetry (the cylinder) this column is pure
            // round-off and the bordered system is singular.
            const double cn = a.col(lam_col).norm();
            if (!(cn > 1e-6 * jmax))
                throw SolverError("newton_solve: the residual does not depend on the period; relax_period is degenerate here");
            lam_scale = jmax / cn;
            a.col(lam_col) *= lam_scale;
        }

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(1e-11);
        if (qr.rank() < dim)
            throw SolverError("newton_solve: gauge-fixed Jacobian is singular (rank " + std::to_string(qr.rank()) +
                              " of " + std::to_string(dim) + ")");
        const Eigen::VectorXd x = qr.solve(rhs);
        if (!x.allFinite())
            throw SolverError("newton_solve: non-finite Newton step");

        Grid dphi(nt, nth);
        for (Eigen::Index i = 0; i < nt; ++i)
            for (Eigen::Index j = 0; j < nth; ++j)
                dphi(i, j) = x(flat(i, j));
        const double dlam = gauge.relax_period ? lam_scale * x(lam_col) : 0.0;
        const double gap = constraint_gap(cur);

        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
            NormalGraphField trial = cur;
            trial.phi += t * dphi;
            trial.axial_scale += t * dlam;
            if (!(trial.axial_scale > 0.0) || !(min_axis_distance(trial) >= opt.min_radius))
                continue;
            Grid trial_res;
            try {
                trial_res = residual_N(trial);
            } catch (const DomainError&) {
                continue;
            }
            const double tr = detail::sup_norm(trial_res);
            // A full step that mainly restores the constraints may leave the
            // residual where it was; accept it once.
            if (tr < r || (h == 0 && gap > tol && tr <= 2.0 * r)) {
                cur = std::move(trial);
                res = std::move(trial_res);
                r = tr;
                accepted = true;
                break;
            }
        }
        ++rep.iterations;
        if (!accepted) {
            rep.message = "line search failed to reduce the residual";
            break;
        }
        rep.residual_history.push_back(r);
    }
    rep.converged = r <= tol && constraint_gap(cur) <= tol;
    if (!rep.converged && rep.message.empty())
        rep.message = "maximum iterations reached";
    rep.solution = std::move(cur);
    return rep;
}

/// Deterministic uniform noise in [-amplitude, amplitude] from a 64-bit
/// Mersenne Twister, independent of the standard library's distributions.
inline Grid uniform_noise(Eigen::Index rows, Eigen::Index cols, double amplitude, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    Grid g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            g(i, j) = amplitude * (2.0 * u - 1.0);
        }
    return g;
}

} // namespace cmc
