#pragma once

// Indicial roots, pole ranks and the dimension counts they produce for
// k-ended CMC surfaces, plus the truncated weight set Gamma measured from
// Delaunay monodromy.

#include <cmc/delaunay.hpp>
#include <cmc/errors.hpp>
#include <cmc/jacobi.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace cmc {

/// Poles of the cylinder indicial family I(zeta) = d_theta^2 + 1 - zeta^2
/// restricted to the Fourier mode m: zeta^2 = 1 - m^2.
struct IndicialData {
    int mode = 0;
    std::vector<std::complex<double>> roots;
    /// Rank of each root, in the same order; only real-line poles carry rank.
    std::vector<int> ranks;
    bool on_real_line = false;

    int rank() const
    {
        int r = 0;
        for (int x : ranks)
            r += x;
        return r;
    }
};

inline IndicialData indicial_roots(int m)
{
    detail::require(m >= 0, "indicial_roots: mode must be nonnegative");
    IndicialData d;
    d.mode = m;
    if (m == 0) {
        // Simple poles at +1 and -1, from the simple eigenvalue 0 of -d_theta^2.
        d.roots = {1.0, -1.0};
        d.ranks = {1, 1};
        d.on_real_line = true;
    } else if (m == 1) {
        // Double pole at 0 from the two-dimensional eigenspace {cos, sin}; each
        // eigenfunction counts twice.
        d.roots = {0.0};
        d.ranks = {4};
        d.on_real_line = true;
    } else {
        const double s = std::sqrt(static_cast<double>(m) * m - 1.0);
        d.roots = {{0.0, s}, {0.0, -s}};
        d.ranks = {0, 0};
        d.on_real_line = false;
    }
    return d;
}

/// Sum of real-line pole ranks over modes 0..m_max for one end.
inline int rank_sum_per_end(int m_max)
{
    detail::require(m_max >= 0, "rank_sum_per_end: m_max must be nonnegative");
    int r = 0;
    for (int m = 0; m <= m_max; ++m)
        r += indicial_roots(m).rank();
    return r;
}

inline void require_ends(int ends, const char* op)
{
    detail::require(ends >= 2, std::string(op) + ": a complete CMC surface has at least two ends");
}

/// rel-ind(delta, -delta) = total real-line rank summed over the k ends.
inline int relative_index(int ends)
{
    require_ends(ends, "relative_index");
    return ends * rank_sum_per_end(1);
}

/// dim of the bounded nullspace: rel-ind(delta, -delta) = 2 dim B.
inline int bounded_nullspace_dim(int ends)
{
    require_ends(ends, "bounded_nullspace_dim");
    return relative_index(ends) / 2;
}

inline constexpr int euclidean_isometry_dim = 6;

/// Continuous isotropy of a two-ended (Delaunay) surface: the rotations about
/// its axis. Axial translations form a discrete subgroup away from the cylinder.
inline constexpr int delaunay_isotropy_dim = 1;

/// Dimension of the quotient of the local solution space by rigid motions:
/// dim(solutions) - dim Isom(R^3) + dim Iso(Sigma).
inline int isometry_quotient_dim(int solution_dim, int isotropy_dim)
{
    return solution_dim - euclidean_isometry_dim + isotropy_dim;
}

enum class Ambient { euclidean3, hyperbolic };

/// Local dimension of the moduli space of k-ended surfaces, assuming no
/// L^2 Jacobi fields.
///
/// Euclidean: 3k - 6 + isotropy_dim for k >= 3, where the isotropy group is
/// finite (isotropy_dim must be 0). For k = 2 the surfaces are Delaunay and
/// the accounting uses their continuous isotropy (rotations about the axis),
/// giving 3k - 5 = 1; the isotropy_dim argument is not used there.
/// Hyperbolic: k for k >= 3 and 1 for k = 2.
inline int moduli_dimension(int ends, Ambient ambient, int isotropy_dim)
{
    require_ends(ends, "moduli_dimension");
    detail::require(isotropy_dim >= 0, "moduli_dimension: isotropy dimension must be nonnegative");
    if (ambient == Ambient::hyperbolic)
        return ends == 2 ? 1 : ends;
    if (ends == 2)
        return isometry_quotient_dim(bounded_nullspace_dim(2), delaunay_isotropy_dim);
    detail::require(isotropy_dim == 0, "moduli_dimension: the isotropy group of a surface with k >= 3 ends is finite");
    return isometry_quotient_dim(bounded_nullspace_dim(ends), isotropy_dim);
}

/// Real parts of the Floquet exponents of modes 0..m_max on one end, as a
/// sorted set (values closer than `merge_tol` are merged).
///
/// The true weight set is infinite and discrete; this is its truncation at m_max.
inline std::vector<double> gamma_weights(const DelaunayProfile& profile, int m_max,
                                         const MonodromyOptions& opt = {}, double merge_tol = 1e-7)
{
    detail::require(m_max >= 1, "gamma_weights: m_max must be at least 1");
    std::vector<double> all;
    for (int m = 0; m <= m_max; ++m) {
        const auto r = monodromy_of(mode_operator(profile, m), opt);
        all.push_back(r.exponents.first.real());
        all.push_back(r.exponents.second.real());
        all.push_back(-r.exponents.first.real());
        all.push_back(-r.exponents.second.real());
    }
    std::sort(all.begin(), all.end());
    std::vector<double> out;
    for (double x : all) {
        if (out.empty() || x - out.back() > merge_tol)
            out.push_back(x == 0.0 ? 0.0 : x);
    }
    return out;
}

struct IndexReport {
    int ends = 0;
    int total_rank_per_end = 0;
    int relative_index = 0;
    int bounded_nullspace_dim = 0;
    /// Dimension of L^2 Jacobi fields, assumed rather than computed.
    int l2_nullspace_dim_assumed = 0;
    int moduli_dim_euclidean = 0;
    int moduli_dim_hyperbolic = 0;
    std::vector<double> gamma;
};

inline IndexReport index_report(int ends, const DelaunayProfile& end_profile, int m_max = 3)
{
    IndexReport r;
    r.ends = ends;
    r.total_rank_per_end = rank_sum_per_end(m_max);
    r.relative_index = relative_index(ends);
    r.bounded_nullspace_dim = bounded_nullspace_dim(ends);
    r.moduli_dim_euclidean = moduli_dimension(ends, Ambient::euclidean3, 0);
    r.moduli_dim_hyperbolic = moduli_dimension(ends, Ambient::hyperbolic, 0);
    r.gamma = gamma_weights(end_profile, m_max);
    return r;
}

} // namespace cmc
