#pragma once

// Fitting an asymptotic Delaunay surface to sampled end data: axis, neck
// parameter, phase, and the exponential rate at which the end approaches it.

#include <cmc/delaunay.hpp>
#include <cmc/errors.hpp>
#include <cmc/frame.hpp>
#include <cmc/geometry.hpp>
#include <cmc/neighbor.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cmc {

struct EndSample {
    std::vector<Eigen::Vector3d> points;
    /// Restricts the fit to t_min <= t <= t_max along the provisional axis,
    /// measured from the first sample; the whole sample when empty.
    std::optional<std::pair<double, double>> window;
};

enum class FitStatus { exact, accepted, rejected };

inline const char* to_string(FitStatus s)
{
    switch (s) {
    case FitStatus::exact:
        return "exact";
    case FitStatus::accepted:
        return "accepted";
    case FitStatus::rejected:
        return "rejected";
    }
    return "?";
}

struct EndFit {
    Eigen::Vector3d axis_point = Eigen::Vector3d::Zero();
    /// Unit direction pointing out along the end; t = (x - axis_point) . axis_direction.
    Eigen::Vector3d axis_direction = Eigen::Vector3d::UnitZ();
    double epsilon = 1.0;
    double period = 0.0;
    /// rho_end(t) ~ rho_D(t - phase), phase in [0, period).
    double phase = 0.0;
    double t_max = 0.0;
    /// Per-bin sup deviation |rho_E - rho_D| at bin centres residual_t.
    std::vector<double> residual_t;
    std::vector<double> residual_profile;
    /// Envelope C exp(-decay_rate t); decay_rate is NaN for exact fits.
    double amplitude = 0.0;
    double decay_rate = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    FitStatus status = FitStatus::rejected;
};

struct EndFitOptions {
    int axis_iterations = 6;
    int reweight_rounds = 8;
    /// Deviations below floor * mean radius count as numerical noise.
    double floor = 1e-11;
    double min_r2 = 0.9;
    std::size_t min_points = 200;
    double min_periods = 2.0;
};

namespace detail {

struct Axis {
    Eigen::Vector3d point;
    Eigen::Vector3d dir;
};

inline Axis principal_axis(const std::vector<Eigen::Vector3d>& pts, double& anisotropy)
{
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : pts)
        c += p;
    c /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts)
        cov += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const auto ev = es.eigenvalues();
    anisotropy = ev(2) / std::max(ev(1), 1e-300);
    return {c, es.eigenvectors().col(2)};
}

/// Line through the centroids of slices perpendicular to the current axis.
inline Axis centroid_line(const std::vector<Eigen::Vector3d>& pts, const Axis& ax, int bins)
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : pts) {
        const double t = (p - ax.point).dot(ax.dir);
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    std::vector<Eigen::Vector3d> sum(static_cast<std::size_t>(bins), Eigen::Vector3d::Zero());
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (const auto& p : pts) {
        const double t = (p - ax.point).dot(ax.dir);
        auto b = static_cast<int>((t - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        sum[static_cast<std::size_t>(b)] += p;
        ++count[static_cast<std::size_t>(b)];
    }
    std::vector<Eigen::Vector3d> cent;
    std::vector<double> w;
    // End slices are cut off mid-ring; leave them out.
    for (int b = 1; b + 1 < bins; ++b)
        if (count[static_cast<std::size_t>(b)] > 0) {
            cent.push_back(sum[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)]);
            w.push_back(count[static_cast<std::size_t>(b)]);
        }
    if (cent.size() < 2)
        throw FitError("axis fit: too few populated slices");
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double wsum = 0.0;
    for (std::size_t k = 0; k < cent.size(); ++k) {
        c += w[k] * cent[k];
        wsum += w[k];
    }
    c /= wsum;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < cent.size(); ++k)
        cov += w[k] * (cent[k] - c) * (cent[k] - c).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Eigen::Vector3d d = es.eigenvectors().col(2);
    if (d.dot(ax.dir) < 0.0)
        d = -d;
    return {c, d};
}

/// Profiles keyed by epsilon; fits revisit the same few values many times.
class ProfileCache {
public:
    const DelaunayProfile& get(double eps)
    {
        auto it = cache_.find(eps);
        if (it != cache_.end())
            return it->second;
        if (cache_.size() > 64)
            cache_.clear();
        return cache_.emplace(eps, solve_profile(eps, dense_profile_samples, 1e-12)).first->second;
    }

private:
    std::map<double, DelaunayProfile> cache_;
};

inline double clamp_epsilon(double e) { return std::clamp(e, 10.0 * min_neck, 1.0); }

/// Axial coordinate and distance to the axis of each point.
inline void cylindrical_coordinates(const std::vector<Eigen::Vector3d>& pts, const Axis& ax, std::vector<double>& t,
                                    std::vector<double>& r)
{
    t.resize(pts.size());
    r.resize(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const Eigen::Vector3d d = pts[k] - ax.point;
        t[k] = d.dot(ax.dir);
        r[k] = (d - t[k] * ax.dir).norm();
    }
}

/// Best phase of a profile against binned radii, by a discrete scan of the
/// correlation over one period and Brent refinement.
inline std::pair<double, double> align_phase(const DelaunayProfile& prof, const std::vector<double>& bt,
                                             const std::vector<double>& br)
{
    auto cost = [&](double s) {
        double c = 0.0;
        for (std::size_t k = 0; k < bt.size(); ++k) {
            const double d = br[k] - prof.at(bt[k] - s).rho;
            c += d * d;
        }
        return c;
    };
    const int scan = 128;
    const double T = prof.period();
    double best_s = 0.0, best_c = std::numeric_limits<double>::infinity();
    for (int k = 0; k < scan; ++k) {
        const double s = T * k / scan;
        const double c = cost(s);
        if (c < best_c) {
            best_c = c;
            best_s = s;
        }
    }
    const auto r = boost::math::tools::brent_find_minima(cost, best_s - T / scan, best_s + T / scan, 40);
    return {r.first, r.second};
}

/// Weighted model residuals for Levenberg-Marquardt over
/// x = (tilt_u, tilt_v, shift_u, shift_v, epsilon, phase).
struct EndResidual : Eigen::DenseFunctor<double> {
    const std::vector<Eigen::Vector3d>* pts;
    const std::vector<double>* weights;
    Axis base;
    Eigen::Vector3d u, v;
    ProfileCache* cache;

    EndResidual(const std::vector<Eigen::Vector3d>& p, const std::vector<double>& w, Axis ax, ProfileCache& c)
        : Eigen::DenseFunctor<double>(6, static_cast<int>(p.size())), pts(&p), weights(&w), base(ax), cache(&c)
    {
        u = base.dir.unitOrthogonal();
        v = base.dir.cross(u);
    }

    Axis axis(const Eigen::VectorXd& x) const
    {
        return {base.point + x(2) * u + x(3) * v, (base.dir + x(0) * u + x(1) * v).normalized()};
    }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const
    {
        const Axis ax = axis(x);
        const DelaunayProfile& prof = cache->get(clamp_epsilon(x(4)));
        for (std::size_t k = 0; k < pts->size(); ++k) {
            const Eigen::Vector3d d = (*pts)[k] - ax.point;
            const double t = d.dot(ax.dir);
            const double r = (d - t * ax.dir).norm();
            f(static_cast<Eigen::Index>(k)) = std::sqrt((*weights)[k]) * (r - prof.at(t - x(5)).rho);
        }
        return 0;
    }

    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const
    {
        const double steps[6] = {1e-6, 1e-6, 1e-6, 1e-6, 1e-5, 1e-6};
        Eigen::VectorXd fp(values()), fm(values());
        for (int c = 0; c < 6; ++c) {
            Eigen::VectorXd xp = x, xm = x;
            xp(c) += steps[c];
            xm(c) -= steps[c];
            if (c == 4 && xp(4) > 1.0) {
                // One-sided at the cylinder.
                xp(4) = x(4);
                xm(4) = x(4) - 2.0 * steps[c];
            }
            (*this)(xp, fp);
            (*this)(xm, fm);
            j.col(c) = (fp - fm) / (xp(c) - xm(c));
        }
        return 0;
    }
};

struct DecayFit {
    double amplitude = 0.0;
    double rate = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    bool exact = false;
    bool accepted = false;
};

/// Per-bin sup profile of |dev| on bins of width `width` starting at t = 0.
inline void sup_profile(const std::vector<double>& t, const std::vector<double>& dev, double t_max, double width,
                        std::vector<double>& bt, std::vector<double>& bv)
{
    const auto nb = static_cast<std::size_t>(std::ceil(t_max / width));
    std::vector<double> v(nb, -1.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
        auto b = static_cast<std::size_t>(std::max(0.0, t[k]) / width);
        b = std::min(b, nb - 1);
        v[b] = std::max(v[b], std::abs(dev[k]));
    }
    bt.clear();
    bv.clear();
    for (std::size_t b = 0; b < nb; ++b)
        if (v[b] >= 0.0) {
            bt.push_back((static_cast<double>(b) + 0.5) * width);
            bv.push_back(v[b]);
        }
}

/// Log-linear fit of the residual envelope on t >= from * t_max.
inline DecayFit decay_regression(const std::vector<double>& bt, const std::vector<double>& bv, double t_max,
                                 double floor, double min_r2, int peak_halfwidth, double from = 0.5,
                                 double resolution_factor = 10.0, double trend = 0.0)
{
    DecayFit d;
    const double top = bv.empty() ? 0.0 : *std::max_element(bv.begin(), bv.end());
    if (top <= floor) {
        d.exact = true;
        d.amplitude = top;
        return d;
    }
    // The residual over the last tenth of the window measures what the fit
    // can resolve: a small error in the fitted parameters leaves a periodic
    // deviation of that size everywhere. Only points well above it are used.
    double tail = 0.0;
    for (std::size_t i = 0; i < bv.size(); ++i)
        if (bt[i] >= 0.9 * t_max)
            tail = std::max(tail, bv[i]);
    const double threshold = std::max(10.0 * floor, resolution_factor * tail);

    // Envelope points: bins within a factor two of the largest value in
    // their neighbourhood, which skips the zeros of an oscillating residual.
    // Values are compared after removing the expected decay `trend`, so a
    // fast envelope does not disqualify its own later peaks.
    auto collect = [&](double t_from) {
        std::vector<std::pair<double, double>> pts;
        const auto n = static_cast<int>(bv.size());
        for (int i = 0; i < n; ++i) {
            const double v = bv[static_cast<std::size_t>(i)];
            if (bt[static_cast<std::size_t>(i)] < t_from || !(v > threshold))
                continue;
            double local = 0.0;
            for (int k = std::max(0, i - peak_halfwidth); k <= std::min(n - 1, i + peak_halfwidth); ++k)
                local = std::max(local, bv[static_cast<std::size_t>(k)] *
                                            std::exp(trend * (bt[static_cast<std::size_t>(k)] -
                                                              bt[static_cast<std::size_t>(i)])));
            if (v >= 0.5 * local)
                pts.emplace_back(bt[static_cast<std::size_t>(i)], std::log(v));
        }
        return pts;
    };
    auto pts = collect(from * t_max);
    if (pts.size() < 3)
        return d;

    double mt = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mt += x;
        my += y;
    }
    mt /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mt) * (x - mt);
        sxy += (x - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    const double slope = sxy / sxx;
    d.rate = -slope;
    d.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    // Upper envelope through the regression points.
    double c = 0.0;
    for (const auto& [x, y] : pts)
        c = std::max(c, std::exp(y + d.rate * x));
    d.amplitude = c;
    d.accepted = d.rate > 0.0 && d.r2 >= min_r2;
    return d;
}

} // namespace detail

/// Fit axis, epsilon and phase of the asymptotic Delaunay surface, then the
/// exponential rate of convergence of the end to it.
///
/// The axis starts from principal components refined by centroid-line
/// regression; (epsilon, phase) start from a Brent search with per-candidate
/// phase alignment; all six parameters are then polished jointly by
/// Levenberg-Marquardt. When the residual decays exponentially, the fit is
/// repeated with weights 1 / (C^2 exp(-2 lambda t) + floor^2), which keeps the
/// transient from biasing epsilon.
inline EndFit fit_end(const EndSample& sample, const EndFitOptions& opt = {})
{
    if (sample.points.size() < opt.min_points)
        throw FitError("fit_end: need at least " + std::to_string(opt.min_points) + " points");
    for (const auto& p : sample.points)
        if (!p.allFinite())
            throw FitError("fit_end: non-finite sample point");

    double anis = 0.0;
    detail::Axis ax = detail::principal_axis(sample.points, anis);
    if (!(anis > 1.5))
        throw FitError("fit_end: ill-conditioned axis fit (sample is not elongated along any direction)");
    // Deterministic orientation of the provisional axis.
    {
        Eigen::Index k = 0;
        ax.dir.cwiseAbs().maxCoeff(&k);
        if (ax.dir(k) < 0.0)
            ax.dir = -ax.dir;
    }

    std::vector<Eigen::Vector3d> pts = sample.points;
    if (sample.window) {
        std::vector<double> t, r;
        detail::cylindrical_coordinates(pts, ax, t, r);
        const double t0 = *std::min_element(t.begin(), t.end());
        std::vector<Eigen::Vector3d> kept;
        for (std::size_t k = 0; k < pts.size(); ++k)
            if (t[k] - t0 >= sample.window->first && t[k] - t0 <= sample.window->second)
                kept.push_back(pts[k]);
        pts = std::move(kept);
        if (pts.size() < opt.min_points)
            throw FitError("fit_end: fewer than " + std::to_string(opt.min_points) + " points inside the window");
    }

    for (int it = 0; it < opt.axis_iterations; ++it)
        ax = detail::centroid_line(pts, ax, 48);

    detail::ProfileCache cache;
    std::vector<double> t, r;
    const std::vector<double> unit(pts.size(), 1.0);

    // Bin radii along t for the (epsilon, phase) search.
    auto initial_guess = [&](const detail::Axis& a) {
        detail::cylindrical_coordinates(pts, a, t, r);
        const double lo = *std::min_element(t.begin(), t.end());
        const double hi = *std::max_element(t.begin(), t.end());
        const int nb = 256;
        std::vector<double> s(nb, 0.0), c(nb, 0.0);
        for (std::size_t k = 0; k < t.size(); ++k) {
            const auto b = std::clamp(static_cast<int>((t[k] - lo) / (hi - lo) * nb), 0, nb - 1);
            s[static_cast<std::size_t>(b)] += r[k];
            c[static_cast<std::size_t>(b)] += 1.0;
        }
        std::vector<double> bt, br;
        double rmin = std::numeric_limits<double>::infinity();
        for (int b = 0; b < nb; ++b)
            if (c[static_cast<std::size_t>(b)] > 0) {
                bt.push_back(lo + (b + 0.5) * (hi - lo) / nb);
                br.push_back(s[static_cast<std::size_t>(b)] / c[static_cast<std::size_t>(b)]);
                rmin = std::min(rmin, br.back());
            }
        auto cost = [&](double e) { return detail::align_phase(cache.get(e), bt, br).second; };
        const double e_lo = detail::clamp_epsilon(rmin - 0.15), e_hi = detail::clamp_epsilon(rmin + 0.15);
        const auto best = boost::math::tools::brent_find_minima(cost, e_lo, e_hi, 30);
        const double e = best.first;
        return std::pair<double, double>{e, detail::align_phase(cache.get(e), bt, br).first};
    };

    auto polish = [&](const detail::Axis& a, double e, double ph, const std::vector<double>& w) {
        detail::EndResidual fn(pts, w, a, cache);
        Eigen::VectorXd x(6);
        x << 0.0, 0.0, 0.0, 0.0, e, ph;
        Eigen::LevenbergMarquardt<detail::EndResidual> lm(fn);
        lm.setXtol(1e-14);
        lm.setFtol(1e-16);
        lm.setMaxfev(400);
        lm.minimize(x);
        x(4) = detail::clamp_epsilon(x(4));
        return std::tuple<detail::Axis, double, double>{fn.axis(x), x(4), x(5)};
    };

    auto [e0, ph0] = initial_guess(ax);
    auto [axf, eps, ph] = polish(ax, e0, ph0, unit);

    auto residuals = [&](const detail::Axis& a, double e, double phase, std::vector<double>& tt, std::vector<double>& dev) {
        std::vector<double> rr;
        detail::cylindrical_coordinates(pts, a, tt, rr);
        const auto& prof = cache.get(e);
        dev.resize(tt.size());
        for (std::size_t k = 0; k < tt.size(); ++k)
            dev[k] = rr[k] - prof.at(tt[k] - phase).rho;
    };

    // Move the axis point to the start of the sample so t runs over [0, t_max].
    auto normalize = [&](detail::Axis& a, double& phase) {
        std::vector<double> tt, rr;
        detail::cylindrical_coordinates(pts, a, tt, rr);
        const double lo = *std::min_element(tt.begin(), tt.end());
        a.point += lo * a.dir;
        phase -= lo;
    };

    normalize(axf, ph);
    std::vector<double> dev;
    residuals(axf, eps, ph, t, dev);
    double mean_r = 0.0;
    for (double x : r)
        mean_r += x;
    mean_r /= static_cast<double>(r.size());
    const double floor = opt.floor * std::max(1.0, mean_r);

    // Orient the axis so that the deviation decays along it.
    {
        const double tmax = *std::max_element(t.begin(), t.end());
        double first = 0.0, second = 0.0;
        for (std::size_t k = 0; k < t.size(); ++k)
            (t[k] < 0.5 * tmax ? first : second) = std::max(t[k] < 0.5 * tmax ? first : second, std::abs(dev[k]));
        if (second > 10.0 * floor && second > first) {
            axf.dir = -axf.dir;
            ph = -ph;
            normalize(axf, ph);
            residuals(axf, eps, ph, t, dev);
        }
    }

    EndFit fit;
    const DelaunayProfile* prof = &cache.get(eps);
    const double tmax = *std::max_element(t.begin(), t.end());
    if (tmax < opt.min_periods * prof->period())
        throw FitError("fit_end: window covers fewer than " + std::to_string(opt.min_periods) + " fitted periods");

    auto regress = [&](double from, double trend) {
        prof = &cache.get(eps);
        const double width = prof->period() / 64.0;
        detail::sup_profile(t, dev, tmax, width, fit.residual_t, fit.residual_profile);
        return detail::decay_regression(fit.residual_t, fit.residual_profile, tmax, floor, opt.min_r2, 16, from,
                                        from > 0.0 ? 10.0 : 3.0, std::max(0.0, trend));
    };

    // Provisional envelopes use peaks from the whole window: the unweighted
    // fit leaves a periodic error that masks the decay in the upper half.
    // Acceptance is judged on the upper half only.
    detail::DecayFit provisional = regress(0.0, 0.0);
    for (int round = 0; round < opt.reweight_rounds && !provisional.exact && provisional.rate > 0.0; ++round) {
        std::vector<double> w(pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const double env = provisional.amplitude * std::exp(-provisional.rate * t[k]);
            w[k] = 1.0 / (env * env + floor * floor);
        }
        const double rate_before = provisional.rate;
        std::tie(axf, eps, ph) = polish(axf, eps, ph, w);
        normalize(axf, ph);
        residuals(axf, eps, ph, t, dev);
        provisional = regress(0.0, rate_before);
        if (std::abs(provisional.rate - rate_before) <= 1e-4 * rate_before)
            break;
    }
    const double trend = std::isfinite(provisional.rate) ? provisional.rate : 0.0;
    const detail::DecayFit d = regress(0.5, trend);

    fit.axis_point = axf.point;
    fit.axis_direction = axf.dir;
    fit.epsilon = eps;
    fit.period = prof->period();
    fit.phase = std::fmod(ph, fit.period);
    if (fit.phase < 0.0)
        fit.phase += fit.period;
    if (fit.period - fit.phase < 1e-9 * fit.period)
        fit.phase = 0.0;
    fit.t_max = tmax;
    fit.amplitude = d.amplitude;
    fit.decay_rate = d.exact ? std::numeric_limits<double>::quiet_NaN() : d.rate;
    fit.r2 = d.r2;
    fit.status = d.exact ? FitStatus::exact : (d.accepted ? FitStatus::accepted : FitStatus::rejected);
    return fit;
}

struct AsymptoteReport {
    /// Sup over theta of the Jacobi-operator coefficient deviations per t row.
    std::vector<double> t;
    std::vector<double> deviation;
    double max_deviation = 0.0;
    double decay_rate = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    FitStatus status = FitStatus::rejected;
};

/// Compares the coefficients of the graph's Jacobi operator (|A|^2 and the
/// induced metric) with those of the fitted Delaunay surface, sampled on the
/// same grid and differentiated by the same stencils, and checks that the
/// deviation decays at a rate of at least (1 - slack) * fit.decay_rate.
inline AsymptoteReport asymptote_validate(const CylindricalGraph& graph, const EndFit& fit, double slack = 0.1,
                                          const EndFitOptions& opt = {})
{
    detail::require(graph.n_t() >= 8 && graph.n_theta() >= 8, "asymptote_validate: graph grid too small");
    detail::require(!graph.periodic_t, "asymptote_validate: expects an open end, not a periodic graph");
    const double length = graph.dt * static_cast<double>(graph.n_t() - 1);
    if (length < opt.min_periods * fit.period)
        throw FitError("asymptote_validate: window covers fewer than " + std::to_string(opt.min_periods) +
                       " fitted periods");

    const auto prof = solve_profile(fit.epsilon, dense_profile_samples, 1e-12);
    CylindricalGraph model = graph;
    std::vector<double> row_t(static_cast<std::size_t>(graph.n_t()));
    for (Eigen::Index i = 0; i < graph.n_t(); ++i) {
        const Eigen::Vector3d c = graph.frame.origin + graph.t(i) * graph.frame.a;
        const double tf = (c - fit.axis_point).dot(fit.axis_direction);
        row_t[static_cast<std::size_t>(i)] = tf;
        model.rho.row(i).setConstant(prof.at(tf - fit.phase).rho);
    }
    const auto g = surface_geometry(graph);
    const auto gm = surface_geometry(model);

    AsymptoteReport rep;
    // Skip the one-sided boundary rows. Per row: the sup deviation for the
    // report, and the theta-mean squared deviation for the decay estimate.
    std::vector<double> sq;
    for (Eigen::Index i = 2; i + 2 < graph.n_t(); ++i) {
        double dv = 0.0, s2 = 0.0;
        for (Eigen::Index j = 0; j < graph.n_theta(); ++j) {
            const double da = g.second_form_norm_sq(i, j) - gm.second_form_norm_sq(i, j);
            const double de = g.metric_tt(i, j) - gm.metric_tt(i, j);
            const double dg = g.metric_thetatheta(i, j) - gm.metric_thetatheta(i, j);
            dv = std::max({dv, std::abs(da), std::abs(de), std::abs(dg)});
            s2 += da * da + de * de + dg * dg;
        }
        rep.t.push_back(row_t[static_cast<std::size_t>(i)]);
        rep.deviation.push_back(dv);
        sq.push_back(s2 / static_cast<double>(graph.n_theta()));
        rep.max_deviation = std::max(rep.max_deviation, dv);
    }
    const double floor = opt.floor * 100.0;
    if (rep.max_deviation <= floor) {
        rep.status = FitStatus::exact;
        return rep;
    }

    // The coefficients of the perturbed operator differ from the Delaunay ones
    // by the perturbation times periodic factors of the Delaunay surface;
    // taking the L^2 norm over a sliding window of one period averages those
    // factors out before the log-linear fit.
    const auto window = static_cast<std::size_t>(std::llround(fit.period / graph.dt));
    if (window < 4 || window + 3 > sq.size())
        throw FitError("asymptote_validate: window too short for a one-period average");
    std::vector<double> prefix(sq.size() + 1, 0.0);
    for (std::size_t k = 0; k < sq.size(); ++k)
        prefix[k + 1] = prefix[k] + sq[k];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k + window <= sq.size(); ++k) {
        const double d = std::sqrt((prefix[k + window] - prefix[k]) * graph.dt);
        if (d > 10.0 * floor)
            pts.emplace_back(rep.t[k], std::log(d));
    }
    if (pts.size() < 3) {
        rep.status = FitStatus::rejected;
        return rep;
    }
    double mt = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mt += x;
        my += y;
    }
    mt /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mt) * (x - mt);
        sxy += (x - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    rep.decay_rate = -sxy / sxx;
    rep.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    const bool decays = rep.decay_rate > 0.0 && rep.r2 >= opt.min_r2;
    const bool rate_ok = fit.status == FitStatus::accepted && rep.decay_rate >= (1.0 - slack) * fit.decay_rate;
    rep.status = decays && rate_ok ? FitStatus::accepted : FitStatus::rejected;
    return rep;
}

/// An end sampled from a Delaunay surface with an added radial perturbation
/// amplitude * exp(-rate t) * cos t, on the grid t = 0, dt, ..., t_max.
inline CylindricalGraph perturbed_delaunay_end(double epsilon, const Frame& frame, double t_max, double dt,
                                               int n_theta, double amplitude, double rate)
{
    detail::require(t_max > 0.0 && dt > 0.0, "perturbed_delaunay_end: need t_max > 0 and dt > 0");
    detail::require(n_theta >= 8 && n_theta % 2 == 0, "perturbed_delaunay_end: n_theta must be even and >= 8");
    const auto prof = solve_profile(epsilon, dense_profile_samples, 1e-12);
    CylindricalGraph g;
    g.frame = frame;
    g.t0 = 0.0;
    g.dt = dt;
    g.periodic_t = false;
    const auto n = static_cast<Eigen::Index>(std::floor(t_max / dt + 1e-9)) + 1;
    g.rho.resize(n, n_theta);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = g.t(i);
        g.rho.row(i).setConstant(prof.at(t).rho + amplitude * std::exp(-rate * t) * std::cos(t));
    }
    return g;
}

inline EndSample sample_from_graph(const CylindricalGraph& g)
{
    EndSample s;
    s.points.reserve(static_cast<std::size_t>(g.n_t() * g.n_theta()));
    for (Eigen::Index i = 0; i < g.n_t(); ++i)
        for (Eigen::Index j = 0; j < g.n_theta(); ++j)
            s.points.push_back(g.point(i, j));
    return s;
}

} // namespace cmc
