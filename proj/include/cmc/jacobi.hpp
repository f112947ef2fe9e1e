#pragma once

// Jacobi operator L = Delta + |A|^2 on Delaunay surfaces: Fourier-mode
// reduction, monodromy and Floquet exponents, the discrete operator on a
// one-period grid, and the six geometric Jacobi fields.

#include <cmc/delaunay.hpp>
#include <cmc/errors.hpp>
#include <cmc/geometry.hpp>
#include <cmc/neighbor.hpp>

#include <boost/numeric/odeint.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace cmc {

/// Coefficients of the mode-m reduction of L at one point of the profile.
///
/// With metric vbar^2 dt^2 + rho^2 dtheta^2, substituting f(t) cos(m theta)
/// into L and multiplying by vbar * rho gives (p f')' + q f = 0 with
/// p = rho / vbar and q = vbar * rho * (|A|^2 - m^2 / rho^2).
struct ModeCoefficients {
    double p;
    double dp;
    double q;
};

inline double second_form_norm_sq(double rho, double rho_t)
{
    const double vbar = std::sqrt(1.0 + rho_t * rho_t);
    const double k2 = 1.0 / (rho * vbar);
    const double k1 = 1.0 - k2; // meridian curvature, from H = 1
    return k1 * k1 + k2 * k2;
}

inline ModeCoefficients mode_coefficients(double rho, double rho_t, int m)
{
    const double vbar = std::sqrt(1.0 + rho_t * rho_t);
    const double rho_tt = profile_acceleration(rho, rho_t);
    const double mm = static_cast<double>(m) * static_cast<double>(m);
    return {rho / vbar, rho_t / vbar - rho * rho_t * rho_tt / (vbar * vbar * vbar),
            vbar * rho * (second_form_norm_sq(rho, rho_t) - mm / (rho * rho))};
}

/// Mode-m Jacobi ODE over one period of a profile, in self-adjoint form.
struct ModeODE {
    DelaunayProfile profile;
    int mode;
    std::vector<ModeCoefficients> coefficients; ///< at the profile samples

    /// f'' + first_order(j) f' + zeroth_order(j) f = 0.
    double first_order(std::size_t j) const { return coefficients[j].dp / coefficients[j].p; }
    double zeroth_order(std::size_t j) const { return coefficients[j].q / coefficients[j].p; }
};

inline ModeODE mode_operator(const DelaunayProfile& profile, int m)
{
    detail::require(m >= 0, "mode_operator: mode must be nonnegative");
    ModeODE ode{profile, m, {}};
    ode.coefficients.reserve(profile.size());
    for (const auto& s : profile.samples())
        ode.coefficients.push_back(mode_coefficients(s.rho, s.rho_t, m));
    return ode;
}

enum class GrowthClass { parabolic, hyperbolic, elliptic };

inline const char* to_string(GrowthClass c)
{
    switch (c) {
    case GrowthClass::parabolic:
        return "parabolic";
    case GrowthClass::hyperbolic:
        return "hyperbolic";
    case GrowthClass::elliptic:
        return "elliptic";
    }
    return "unknown";
}

using FloquetPair = std::pair<std::complex<double>, std::complex<double>>;

struct MonodromyResult {
    int mode = 0;
    double period = 0.0;
    /// Period map on (w, p w'); det = 1 up to integration error.
    Eigen::Matrix2d matrix = Eigen::Matrix2d::Identity();
    double trace = 2.0;
    double determinant = 1.0;
    GrowthClass classification = GrowthClass::parabolic;
    /// Clockwise turning of the solution with initial data (1, 0) over one period,
    /// used to pick the branch of the multiplier logarithm.
    double winding = 0.0;
    FloquetPair exponents;
};

struct MonodromyOptions {
    double tol = 1e-12;
    /// |trace| - 2 within this band is classified parabolic.
    double parabolic_tol = 1e-6;
};

namespace detail {

inline std::complex<double> branch_log(double modulus, double arg, double winding)
{
    // Shift arg by multiples of 2 pi towards the measured winding.
    const double two_pi = 2.0 * std::numbers::pi;
    const double k = std::round((winding - arg) / two_pi);
    return {std::log(modulus), arg + two_pi * k};
}

} // namespace detail

/// Floquet exponents log(multiplier) / period. For parabolic maps the
/// multipliers are taken on the unit circle, so both exponents are imaginary.
inline FloquetPair floquet_exponents(const MonodromyResult& r, double period)
{
    detail::require(period > 0.0, "floquet_exponents: period must be positive");
    const double tr = r.trace;
    const double det = r.determinant;
    std::complex<double> l1, l2;
    if (r.classification == GrowthClass::hyperbolic) {
        const double disc = std::sqrt(tr * tr - 4.0 * det);
        const double a = 0.5 * (tr + std::copysign(disc, tr));
        const double b = det / a;
        const double arg = tr < 0.0 ? std::numbers::pi : 0.0;
        l1 = detail::branch_log(std::abs(a), arg, r.winding);
        l2 = detail::branch_log(std::abs(b), arg, r.winding);
        if (l2.real() > l1.real())
            std::swap(l1, l2);
    } else {
        const double modulus =
            r.classification == GrowthClass::parabolic ? 1.0 : std::sqrt(std::max(det, 0.0));
        const double c = std::clamp(0.5 * tr / std::sqrt(std::max(det, 1e-300)), -1.0, 1.0);
        const double alpha = std::acos(c);
        l1 = detail::branch_log(modulus, alpha, r.winding);
        l1 = {l1.real(), std::abs(l1.imag())};
        l2 = std::conj(l1);
    }
    return {l1 / period, l2 / period};
}

/// Integrates the two fundamental solutions of (p f')' + q f = 0 with data
/// (1, 0) and (0, 1) on (w, p w') across one period, together with the
/// profile itself, and classifies the period map by its trace.
///
/// The period is split into segments whose transfer matrices are multiplied;
/// the determinant is the product of segment determinants, which stays
/// accurate when the entries of the full map are large (modes m >= 2).
inline MonodromyResult monodromy_of(const ModeODE& ode, const MonodromyOptions& opt = {})
{
    namespace odeint = boost::numeric::odeint;
    // rho, rho_t, (w1, y1), (w2, y2), tracked solution (u, y), its angle
    using State = std::array<double, 9>;
    const int m = ode.mode;
    const double period = ode.profile.period();
    const auto& s0 = ode.profile.samples().front();

    auto rhs = [m](const State& x, State& dx, double /*t*/) {
        const ModeCoefficients c = mode_coefficients(x[0], x[1], m);
        dx[0] = x[1];
        dx[1] = profile_acceleration(x[0], x[1]);
        dx[2] = x[3] / c.p;
        dx[3] = -c.q * x[2];
        dx[4] = x[5] / c.p;
        dx[5] = -c.q * x[4];
        dx[6] = x[7] / c.p;
        dx[7] = -c.q * x[6];
        dx[8] = (x[6] * dx[7] - x[7] * dx[6]) / (x[6] * x[6] + x[7] * x[7]);
    };

    constexpr int segments = 16;
    Eigen::Matrix2d total = Eigen::Matrix2d::Identity();
    double det = 1.0;
    double angle = 0.0;
    State x{s0.rho, s0.rho_t, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0};
    auto stepper = odeint::make_controlled(opt.tol, opt.tol, odeint::runge_kutta_fehlberg78<State>());
    for (int k = 0; k < segments; ++k) {
        const double ta = period * k / segments;
        const double tb = period * (k + 1) / segments;
        try {
            odeint::integrate_adaptive(stepper, rhs, x, ta, tb, 1e-3);
        } catch (const std::exception& e) {
            throw NumericError(std::string("monodromy integration failed: ") + e.what());
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw NumericError("monodromy integration produced non-finite values");
        Eigen::Matrix2d seg;
        seg << x[2], x[4], x[3], x[5];
        total = seg * total;
        det *= seg.determinant();
        angle += x[8];
        const double r = std::hypot(x[6], x[7]);
        x = {x[0], x[1], 1.0, 0.0, 0.0, 1.0, x[6] / r, x[7] / r, 0.0};
    }

    MonodromyResult res;
    res.mode = m;
    res.period = period;
    res.matrix = total;
    res.trace = total.trace();
    res.determinant = det;
    res.winding = -angle;
    const double excess = std::abs(res.trace) - 2.0 * std::sqrt(std::max(det, 0.0));
    if (std::abs(excess) <= opt.parabolic_tol)
        res.classification = GrowthClass::parabolic;
    else if (excess > 0.0)
        res.classification = GrowthClass::hyperbolic;
    else
        res.classification = GrowthClass::elliptic;
    res.exponents = floquet_exponents(res, period);
    return res;
}

inline MonodromyResult monodromy_of(const ModeODE& ode, double tol)
{
    MonodromyOptions opt;
    opt.tol = tol;
    return monodromy_of(ode, opt);
}

/// A field on the one-period (t, theta) grid that continues quasi-periodically:
/// phi(t + T, theta) = phi(t, theta) + T * growth(t, theta). Bounded
/// periodic fields have zero growth.
struct JacobiField {
    Grid values;
    Grid growth;

    static JacobiField periodic(Grid v)
    {
        JacobiField f;
        f.growth = Grid::Zero(v.rows(), v.cols());
        f.values = std::move(v);
        return f;
    }
};

/// Discrete L = Delta + |A|^2 on the sample grid of a profile, periodic in t.
///
/// The t-part is the conservative second-order stencil
/// (1/(vbar rho)) [p_{i+1/2} (f_{i+1} - f_i) - p_{i-1/2} (f_i - f_{i-1})] / h^2
/// with p = rho / vbar averaged to half points; the theta-part is spectral.
/// Assembled directly from the profile, independent of the surface geometry
/// pipeline.
class JacobiOperator {
public:
    explicit JacobiOperator(const DelaunayProfile& profile) : period_(profile.period()), h_(profile.spacing())
    {
        const std::size_t n = profile.size();
        p_.resize(n);
        inv_area_.resize(n);
        inv_rho2_.resize(n);
        a2_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = profile.samples()[i];
            const double vbar = std::sqrt(1.0 + s.rho_t * s.rho_t);
            p_[i] = s.rho / vbar;
            inv_area_[i] = 1.0 / (vbar * s.rho);
            inv_rho2_[i] = 1.0 / (s.rho * s.rho);
            a2_[i] = second_form_norm_sq(s.rho, s.rho_t);
        }
    }

    Eigen::Index n_t() const { return static_cast<Eigen::Index>(p_.size()); }
    double period() const { return period_; }
    double spacing() const { return h_; }
    double second_form_norm_sq_at(Eigen::Index i) const { return a2_[static_cast<std::size_t>(i)]; }

    Grid apply(const JacobiField& f) const
    {
        const Eigen::Index n = n_t();
        detail::require(f.values.rows() == n, "JacobiOperator: field has the wrong number of t rows");
        const Grid ftt = theta_second_derivative(f.values);
        Grid out(n, f.values.cols());
        const double h2 = h_ * h_;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const auto up = static_cast<std::size_t>((i + 1) % n);
            const auto um = static_cast<std::size_t>((i + n - 1) % n);
            const Eigen::RowVectorXd next =
                i + 1 < n ? Eigen::RowVectorXd(f.values.row(i + 1))
                          : Eigen::RowVectorXd(f.values.row(0) + period_ * f.growth.row(0));
            const Eigen::RowVectorXd prev =
                i > 0 ? Eigen::RowVectorXd(f.values.row(i - 1))
                      : Eigen::RowVectorXd(f.values.row(n - 1) - period_ * f.growth.row(n - 1));
            const double pp = 0.5 * (p_[ui] + p_[up]);
            const double pm = 0.5 * (p_[ui] + p_[um]);
            out.row(i) = inv_area_[ui] * (pp * (next - f.values.row(i)) - pm * (f.values.row(i) - prev)) / h2 +
                         inv_rho2_[ui] * ftt.row(i) + a2_[ui] * f.values.row(i);
        }
        return out;
    }

    Grid apply(const Grid& periodic_field) const
    {
        JacobiField f;
        f.values = periodic_field;
        f.growth = Grid::Zero(periodic_field.rows(), periodic_field.cols());
        return apply(f);
    }

private:
    double period_;
    double h_;
    std::vector<double> p_, inv_area_, inv_rho2_, a2_;
};

enum class GrowthTag { bounded_periodic, linear };

inline const char* to_string(GrowthTag g) { return g == GrowthTag::linear ? "linear" : "bounded-periodic"; }

struct TaggedField {
    JacobiField field;
    GrowthTag tag;
};

/// The six geometric Jacobi fields of one Delaunay period: axial translation,
/// change of Delaunay parameter, two transverse translations and two axis
/// rotations pivoting at the neck point on the axis. Each field is scaled to
/// unit sup-norm over the period (phi_0_1 vanishes identically on the cylinder
/// and is left at zero).
struct GeometricJacobiBasis {
    DelaunayProfile profile;
    Eigen::Index n_theta = 0;
    TaggedField phi_0_1;
    TaggedField phi_0_2;
    std::array<TaggedField, 2> phi_1_1;
    std::array<TaggedField, 2> phi_1_2;

    std::array<const TaggedField*, 6> all() const
    {
        return {&phi_0_1, &phi_0_2, &phi_1_1[0], &phi_1_1[1], &phi_1_2[0], &phi_1_2[1]};
    }
};

namespace detail {

inline void normalize(JacobiField& f)
{
    const double s = f.values.cwiseAbs().maxCoeff();
    if (s > 1e-300) {
        f.values /= s;
        f.growth /= s;
    }
}

/// d/d(eta) u_{epsilon + eta} at the given t, as a central difference with
/// one Richardson step (one-sided at epsilon = 1).
inline std::vector<double> parameter_derivative(const DelaunayProfile& base_dense, double eta,
                                                std::span<const double> t)
{
    const double eps = base_dense.epsilon().value();
    auto height = [&](double d) {
        if (d == 0.0)
            return std::vector<double>(t.size(), 0.0);
        const auto target = solve_profile(eps + d, dense_profile_samples);
        return normal_graph_height(base_dense, target, t);
    };
    auto diff = [&](double e) {
        std::vector<double> d(t.size());
        if (base_dense.epsilon().is_cylinder()) {
            const auto a = height(-e), b = height(-2.0 * e);
            for (std::size_t k = 0; k < t.size(); ++k)
                d[k] = (b[k] - 4.0 * a[k]) / (2.0 * e);
        } else {
            const auto a = height(e), b = height(-e);
            for (std::size_t k = 0; k < t.size(); ++k)
                d[k] = (a[k] - b[k]) / (2.0 * e);
        }
        return d;
    };
    const auto coarse = diff(eta);
    const auto fine = diff(0.5 * eta);
    std::vector<double> out(t.size());
    for (std::size_t k = 0; k < t.size(); ++k)
        out[k] = (4.0 * fine[k] - coarse[k]) / 3.0;
    return out;
}

} // namespace detail

inline GeometricJacobiBasis geometric_jacobi_fields(const DelaunayProfile& profile, double eta_step,
                                                    Eigen::Index n_theta = 16)
{
    const double eps = profile.epsilon().value();
    if (profile.epsilon().is_cylinder())
        detail::require(eta_step > 0.0 && 2.0 * eta_step < 1.0 - min_neck,
                        "geometric_jacobi_fields: eta_step out of range at the cylinder");
    else
        detail::require(eta_step > 0.0 && eta_step < std::min(eps, 1.0 - eps),
                        "geometric_jacobi_fields: eta_step must lie in (0, min(eps, 1 - eps))");
    detail::require(n_theta >= 8 && n_theta % 2 == 0, "geometric_jacobi_fields: n_theta must be even and >= 8");

    const auto n = static_cast<Eigen::Index>(profile.size());
    const double period = profile.period();
    GeometricJacobiBasis basis{profile, n_theta, {}, {}, {}, {}};

    Grid axial(n, n_theta), cos_t(n, n_theta), sin_t(n, n_theta);
    Grid rot_c(n, n_theta), rot_s(n, n_theta), rot_gc(n, n_theta), rot_gs(n, n_theta);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = profile.samples()[static_cast<std::size_t>(i)];
        const double vbar = std::sqrt(1.0 + s.rho_t * s.rho_t);
        for (Eigen::Index j = 0; j < n_theta; ++j) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_theta);
            const double c = std::cos(th), sn = std::sin(th);
            axial(i, j) = -s.rho_t / vbar;
            cos_t(i, j) = c / vbar;
            sin_t(i, j) = sn / vbar;
            // nu . (w x F) for w = c and w = -b: (t + rho rho_t) {cos, sin} / vbar.
            rot_c(i, j) = c * (s.t + s.rho * s.rho_t) / vbar;
            rot_s(i, j) = sn * (s.t + s.rho * s.rho_t) / vbar;
            rot_gc(i, j) = c / vbar;
            rot_gs(i, j) = sn / vbar;
        }
    }
    basis.phi_0_1 = {JacobiField::periodic(axial), GrowthTag::bounded_periodic};
    basis.phi_1_1[0] = {JacobiField::periodic(cos_t), GrowthTag::bounded_periodic};
    basis.phi_1_1[1] = {JacobiField::periodic(sin_t), GrowthTag::bounded_periodic};
    basis.phi_1_2[0] = {{rot_c, rot_gc}, GrowthTag::linear};
    basis.phi_1_2[1] = {{rot_s, rot_gs}, GrowthTag::linear};

    // Parameter change: difference quotient of neighboring normal graphs,
    // evaluated over two consecutive periods to expose the linear growth.
    const auto dense = solve_profile(profile.epsilon(), dense_profile_samples);
    std::vector<double> t(2 * static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        t[static_cast<std::size_t>(i)] = profile.samples()[static_cast<std::size_t>(i)].t;
        t[static_cast<std::size_t>(i + n)] = t[static_cast<std::size_t>(i)] + period;
    }
    const auto d = detail::parameter_derivative(dense, eta_step, t);
    Grid param(n, n_theta), param_growth(n, n_theta);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = d[static_cast<std::size_t>(i)];
        const double b = d[static_cast<std::size_t>(i + n)];
        param.row(i).setConstant(a);
        param_growth.row(i).setConstant((b - a) / period);
    }
    basis.phi_0_2 = {{param, param_growth}, GrowthTag::linear};

    for (TaggedField* f : {&basis.phi_0_1, &basis.phi_0_2, &basis.phi_1_1[0], &basis.phi_1_1[1], &basis.phi_1_2[0],
                           &basis.phi_1_2[1]})
        detail::normalize(f->field);
    return basis;
}

/// Dimension of the deficiency subspace W for a k-ended surface: six fields per end.
inline int deficiency_dim(int ends)
{
    detail::require(ends >= 2, "deficiency_dim: a complete CMC surface has at least two ends");
    return 6 * ends;
}

/// Per-end geometric Jacobi bases, cut off to be supported beyond t = cutoff_start.
struct DeficiencySpace {
    int ends = 0;
    std::vector<GeometricJacobiBasis> per_end;
    double cutoff_start = 0.0;

    int dimension() const { return 6 * ends; }
};

inline DeficiencySpace make_deficiency_space(const std::vector<DelaunayProfile>& end_profiles, double cutoff_start,
                                             double eta_step = 1e-4, Eigen::Index n_theta = 16)
{
    const int k = static_cast<int>(end_profiles.size());
    deficiency_dim(k);
    DeficiencySpace w;
    w.ends = k;
    w.cutoff_start = cutoff_start;
    for (const auto& p : end_profiles) {
        double eta = eta_step;
        if (!p.epsilon().is_cylinder())
            eta = std::min(eta_step, 0.5 * std::min(p.epsilon().value(), 1.0 - p.epsilon().value()));
        w.per_end.push_back(geometric_jacobi_fields(p, eta, n_theta));
    }
    return w;
}

} // namespace cmc
