#pragma once

// Neighboring Delaunay surfaces written as normal graphs over a base Delaunay
// surface. Both profiles share the axis and have a neck at t = 0.

#include <cmc/delaunay.hpp>
#include <cmc/errors.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace cmc {

/// Sample count used for profiles that are only evaluated through at().
inline constexpr std::size_t dense_profile_samples = 4096;

/// Normal-graph height u(t) of `target` over `base`. The base curve is
/// (axial_scale * t, rho_base(t)); axial_scale != 1 stretches the base along
/// its axis. The result is theta-independent.
///
/// Throws DomainError when a normal line does not meet the target profile
/// transversally or the graph would fold (|u| beyond the focal distance).
inline std::vector<double> normal_graph_height(const DelaunayProfile& base, const DelaunayProfile& target,
                                               std::span<const double> t_values, double axial_scale = 1.0)
{
    detail::require(axial_scale > 0.0, "normal_graph_height: axial scale must be positive");
    std::vector<double> u(t_values.size());
    for (std::size_t k = 0; k < t_values.size(); ++k) {
        const double t = t_values[k];
        const ProfileState b = base.at(t);
        const double z = axial_scale * t;
        const double w = std::hypot(axial_scale, b.rho_t);
        const double nz = -b.rho_t / w;
        const double nr = axial_scale / w;

        double s = target.at(z).rho - b.rho;
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            const ProfileState q = target.at(z + s * nz);
            const double g = b.rho + s * nr - q.rho;
            const double dg = nr - q.rho_t * nz;
            if (!(std::abs(dg) > 0.1 * nr))
                throw DomainError("normal line meets the target profile tangentially at t = " + std::to_string(t));
            const double step = g / dg;
            s -= step;
            if (!std::isfinite(s) || std::abs(s) > b.rho)
                break;
            if (std::abs(step) <= 1e-15 * (1.0 + std::abs(s))) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw DomainError("normal line misses the target profile at t = " + std::to_string(t));

        // Meridian curvature of the (possibly stretched) base curve.
        const double kappa = -axial_scale * b.rho_tt / (w * w * w);
        if (!(1.0 + s * kappa > 0.1))
            throw DomainError("normal graph is not single-valued; eta too large");
        u[k] = s;
    }
    return u;
}

/// u_{epsilon + eta} over D_epsilon on the uniform one-period grid of n_t points.
///
/// With stretch_to_target the base is stretched axially by
/// T(epsilon + eta) / T(epsilon), which makes the graph periodic on the base
/// grid; this is the representation a periodic solver recovers.
inline std::vector<double> delaunay_neighbor_graph(double epsilon, double eta, std::size_t n_t,
                                                   bool stretch_to_target = false)
{
    detail::require(epsilon > 0.0 && epsilon <= 1.0, "delaunay_neighbor_graph: epsilon must lie in (0, 1]");
    detail::require(epsilon + eta > 0.0 && epsilon + eta <= 1.0,
                    "delaunay_neighbor_graph: epsilon + eta must lie in (0, 1]");
    detail::require(n_t >= 1, "delaunay_neighbor_graph: need at least one point");
    const auto base = solve_profile(epsilon, dense_profile_samples);
    std::vector<double> t(n_t);
    for (std::size_t j = 0; j < n_t; ++j)
        t[j] = base.period() * static_cast<double>(j) / static_cast<double>(n_t);
    if (eta == 0.0)
        return std::vector<double>(n_t, 0.0);
    const auto target = solve_profile(epsilon + eta, dense_profile_samples);
    const double scale = stretch_to_target ? target.period() / base.period() : 1.0;
    return normal_graph_height(base, target, t, scale);
}

} // namespace cmc
