#pragma once

#include <cmc/errors.hpp>

#include <Eigen/Dense>

#include <cmath>

namespace cmc {

/// Positively oriented orthonormal frame (a, b, c) anchored at a point on the axis.
struct Frame {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d a = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d b = Eigen::Vector3d::UnitX();
    Eigen::Vector3d c = Eigen::Vector3d::UnitY();

    Eigen::Vector3d omega(double theta) const { return b * std::cos(theta) + c * std::sin(theta); }
    Eigen::Vector3d omega_prime(double theta) const { return -b * std::sin(theta) + c * std::cos(theta); }

    /// Completes a unit axis direction to a frame. b is the projection of the
    /// coordinate vector least aligned with the axis.
    static Frame from_axis(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction)
    {
        const double n = direction.norm();
        if (!(n > 1e-12) || !direction.allFinite())
            throw DomainError("degenerate axis direction");
        Frame f;
        f.origin = origin;
        f.a = direction / n;
        Eigen::Index k = 0;
        f.a.cwiseAbs().minCoeff(&k);
        Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
        f.b = (e - e.dot(f.a) * f.a).normalized();
        f.c = f.a.cross(f.b);
        return f;
    }

    /// Checks orthonormality and det(a, b, c) = +1.
    void validate(double tol = 1e-9) const
    {
        Eigen::Matrix3d m;
        m << a, b, c;
        if (!((m.transpose() * m - Eigen::Matrix3d::Identity()).norm() < tol) || !(std::abs(m.determinant() - 1.0) < tol))
            throw DomainError("frame is not positively oriented orthonormal");
    }
};

} // namespace cmc
