#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bipar/mesh.hpp"
#include "bipar/rig.hpp"

namespace bipar {

struct SocketCircle {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 0.0;
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

// Spherical eyeball seated behind an eye-socket circle:
//   eye_center = socket_center - depth * socket_normal.
struct EyeballFit {
    Eigen::Vector3d socket_center = Eigen::Vector3d::Zero();
    double socket_radius = 0.0;
    Eigen::Vector3d socket_normal = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d eye_center = Eigen::Vector3d::Zero();
    double eye_radius = 0.0;
    double depth = 0.0;
};

// Per-model measurement used to estimate the eye constants.
struct EyeRatioSample {
    double eye_radius = 0.0;
    double depth = 0.0;
    double socket_radius = 0.0;
};

struct EyeConstants {
    double c1 = 0.0;  // eye_radius / socket_radius
    double c2 = 0.0;  // depth / socket_radius
};

// Least-squares circle through >= 3 points in space. The plane is the total
// least-squares plane (smallest principal direction of the point
// covariance); the circle is the algebraic (Kasa) fit in plane coordinates
// followed by one Gauss-Newton step on the geometric residual. The normal
// is oriented to have a non-negative dot product with `outward`.
inline SocketCircle fit_socket_circle(std::span<const Eigen::Vector3d> points,
                                      const Eigen::Vector3d& outward = Eigen::Vector3d::UnitZ()) {
    const auto m = static_cast<Eigen::Index>(points.size());
    require(m >= 3, ErrorKind::degenerate_input, "circle fit needs at least 3 points");

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : points) centroid += p;
    centroid /= static_cast<double>(m);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : points) cov += (p - centroid) * (p - centroid).transpose();
    cov /= static_cast<double>(m);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    require(ev(2) > 0.0 && ev(1) > 1e-12 * ev(2), ErrorKind::degenerate_input,
            "points are collinear or coincident; plane normal is ambiguous");

    Eigen::Vector3d normal = es.eigenvectors().col(0).normalized();
    if (normal.dot(outward) < 0.0) normal = -normal;
    const Eigen::Vector3d e1 = es.eigenvectors().col(2).normalized();
    const Eigen::Vector3d e2 = normal.cross(e1).normalized();

    // plane coordinates, scaled to unit RMS spread for conditioning
    const double scale = std::sqrt(ev(1) + ev(2));
    Eigen::MatrixX2d q(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Vector3d d = points[static_cast<std::size_t>(i)] - centroid;
        q(i, 0) = d.dot(e1) / scale;
        q(i, 1) = d.dot(e2) / scale;
    }

    Eigen::MatrixX3d a(m, 3);
    a.col(0) = q.col(0);
    a.col(1) = q.col(1);
    a.col(2).setOnes();
    const Eigen::VectorXd b = q.rowwise().squaredNorm();
    const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
    Eigen::Vector2d c(0.5 * sol(0), 0.5 * sol(1));
    double r = std::sqrt(std::max(0.0, sol(2) + c.squaredNorm()));

    // Gauss-Newton on sum (|q_i - c| - r)^2
    Eigen::MatrixX3d jac(m, 3);
    Eigen::VectorXd res(m);
    bool usable = true;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Vector2d d = q.row(i).transpose() - c;
        const double dist = d.norm();
        if (dist == 0.0) {
            usable = false;
            break;
        }
        jac(i, 0) = -d(0) / dist;
        jac(i, 1) = -d(1) / dist;
        jac(i, 2) = -1.0;
        res(i) = dist - r;
    }
    if (usable) {
        const Eigen::Vector3d step = jac.colPivHouseholderQr().solve(-res);
        if (step.allFinite()) {
            c += step.head<2>();
            r += step(2);
        }
    }
    require(r > 0.0, ErrorKind::degenerate_input, "fitted circle has no positive radius");

    SocketCircle out;
    out.center = centroid + scale * (c(0) * e1 + c(1) * e2);
    out.radius = scale * r;
    out.normal = normal;
    return out;
}

inline SocketCircle fit_socket_circle(const Mesh& mesh, const std::vector<int>& indices,
                                      const Eigen::Vector3d& outward = Eigen::Vector3d::UnitZ()) {
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(indices.size());
    for (int i : indices) {
        require(i >= 0 && i < mesh.vertices.rows(), ErrorKind::index_out_of_range,
                "socket vertex " + std::to_string(i) + " out of range");
        pts.emplace_back(mesh.vertices.row(i).transpose());
    }
    return fit_socket_circle(std::span<const Eigen::Vector3d>(pts), outward);
}

// eye_radius = c1 * r_s, depth = c2 * r_s, eye_center = o_s - depth * n.
inline EyeballFit reconstruct_eyeball(const Eigen::Vector3d& socket_center, double socket_radius,
                                      const Eigen::Vector3d& socket_normal, double c1, double c2) {
    require(std::abs(socket_normal.norm() - 1.0) <= 1e-12, ErrorKind::invalid_argument,
            "socket normal must be unit length");
    require(socket_radius > 0.0, ErrorKind::invalid_argument, "socket radius must be positive");
    require(c1 > 0.0 && c2 >= 0.0, ErrorKind::invalid_argument,
            "eye constants need c1 > 0 and c2 >= 0");
    EyeballFit e;
    e.socket_center = socket_center;
    e.socket_radius = socket_radius;
    e.socket_normal = socket_normal;
    e.eye_radius = c1 * socket_radius;
    e.depth = c2 * socket_radius;
    e.eye_center = socket_center - e.depth * socket_normal;
    return e;
}

inline EyeballFit reconstruct_eyeball(const SocketCircle& s, double c1, double c2) {
    return reconstruct_eyeball(s.center, s.radius, s.normal, c1, c2);
}

// c1 = mean(eye_radius / socket_radius), c2 = mean(depth / socket_radius).
inline EyeConstants estimate_eye_constants(std::span<const EyeRatioSample> fits) {
    require(!fits.empty(), ErrorKind::invalid_argument, "no eye measurements");
    EyeConstants c;
    for (const auto& f : fits) {
        require(f.socket_radius > 0.0, ErrorKind::invalid_argument,
                "socket radius must be positive");
        c.c1 += f.eye_radius / f.socket_radius;
        c.c2 += f.depth / f.socket_radius;
    }
    c.c1 /= static_cast<double>(fits.size());
    c.c2 /= static_cast<double>(fits.size());
    return c;
}

// Center and radius of a closed spherical eyeball mesh: vertex centroid and
// mean distance to it.
inline std::pair<Eigen::Vector3d, double> measure_eye_sphere(const Mesh& eye) {
    require(eye.vertices.rows() > 0, ErrorKind::invalid_argument, "empty eyeball mesh");
    const Eigen::Vector3d center = eye.vertices.colwise().mean().transpose();
    double r = 0.0;
    for (Eigen::Index i = 0; i < eye.vertices.rows(); ++i)
        r += (eye.vertices.row(i).transpose() - center).norm();
    return {center, r / static_cast<double>(eye.vertices.rows())};
}

// Latitude/longitude sphere; the poles lie on the +-socket_normal axis.
inline Mesh eyeball_mesh(const EyeballFit& eye, int rings = 8, int segments = 16) {
    require(rings >= 2 && segments >= 3, ErrorKind::invalid_argument, "eyeball mesh too coarse");
    const Eigen::Vector3d axis = eye.socket_normal.normalized();
    Eigen::Vector3d u = axis.unitOrthogonal();
    Eigen::Vector3d v = axis.cross(u);

    const int n = 2 + (rings - 1) * segments;
    Points verts(n, 3);
    UVs uvs(n, 2);
    verts.row(0) = (eye.eye_center + eye.eye_radius * axis).transpose();
    uvs.row(0) << 0.5, 0.0;
    int at = 1;
    for (int r = 1; r < rings; ++r) {
        const double phi = std::numbers::pi * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double lam = 2.0 * std::numbers::pi * s / segments;
            const Eigen::Vector3d dir =
                std::cos(phi) * axis + std::sin(phi) * (std::cos(lam) * u + std::sin(lam) * v);
            verts.row(at) = (eye.eye_center + eye.eye_radius * dir).transpose();
            uvs.row(at) << static_cast<double>(s) / segments, static_cast<double>(r) / rings;
            ++at;
        }
    }
    verts.row(at) = (eye.eye_center - eye.eye_radius * axis).transpose();
    uvs.row(at) << 0.5, 1.0;

    std::vector<int> f;
    const auto ring_at = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
    for (int s = 0; s < segments; ++s) f.insert(f.end(), {0, ring_at(1, s), ring_at(1, s + 1)});
    for (int r = 1; r < rings - 1; ++r) {
        for (int s = 0; s < segments; ++s) {
            f.insert(f.end(), {ring_at(r, s), ring_at(r + 1, s), ring_at(r + 1, s + 1)});
            f.insert(f.end(), {ring_at(r, s), ring_at(r + 1, s + 1), ring_at(r, s + 1)});
        }
    }
    const int south = n - 1;
    for (int s = 0; s < segments; ++s)
        f.insert(f.end(), {ring_at(rings - 1, s), south, ring_at(rings - 1, s + 1)});

    Faces faces = Eigen::Map<const Faces>(f.data(), static_cast<Eigen::Index>(f.size() / 3), 3);
    return make_mesh(std::move(verts), std::move(faces), std::move(uvs));
}

}  // namespace bipar
