#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "bipar/mesh.hpp"
#include "bipar/rig.hpp"

namespace bipar {

// Axis-angle per joint, flattened (3K).
using PoseParams = Eigen::VectorXd;

inline constexpr double kSmallAngle = 1e-12;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d s;
    s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return s;
}

// R = I + (sin p / p) [w]x + ((1 - cos p) / p^2) [w]x^2 with p = |w|.
// (1 - cos p) is evaluated as 2 sin^2(p/2) to stay accurate for small p;
// below kSmallAngle both coefficients use their second-order series.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
    const double p2 = w.squaredNorm();
    const double p = std::sqrt(p2);
    double a, b;
    if (p < kSmallAngle) {
        a = 1.0 - p2 / 6.0;
        b = 0.5 - p2 / 24.0;
    } else {
        const double h = std::sin(0.5 * p);
        a = std::sin(p) / p;
        b = 2.0 * h * h / p2;
    }
    if (p2 == 0.0) return Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d k = skew(w);
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

// Left Jacobian of the rotation exponential:
//   rodrigues(w + d) ~ rodrigues(left_jacobian(w) d) * rodrigues(w).
inline Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& w) {
    const double p2 = w.squaredNorm();
    const double p = std::sqrt(p2);
    double a, b;
    if (p < 1e-4) {
        a = 0.5 - p2 / 24.0;
        b = 1.0 / 6.0 - p2 / 120.0;
    } else {
        const double h = std::sin(0.5 * p);
        a = 2.0 * h * h / p2;
        b = (p - std::sin(p)) / (p2 * p);
    }
    const Eigen::Matrix3d k = skew(w);
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

inline Eigen::Vector3d joint_angle(const PoseParams& pose, int k) {
    return pose.segment<3>(3 * k);
}

struct JointTransforms {
    // Global transform of each joint: product of [R(theta_j) | offset_j]
    // over the chain from the root, offset_j = J_j - J_parent(j) (root: J_0).
    std::vector<Eigen::Isometry3d> global;
    // Global transform with the rest-pose transform removed:
    // global[k] * global_rest[k]^-1. Maps rest-pose points to posed points.
    std::vector<Eigen::Isometry3d> rest_relative;
};

inline JointTransforms forward_kinematics(const Skeleton& sk, const PoseParams& pose) {
    const int k_count = sk.joint_count();
    require(pose.size() == 3 * k_count, ErrorKind::dimension_mismatch,
            "pose has " + std::to_string(pose.size()) + " entries, skeleton needs " +
                std::to_string(3 * k_count));
    require(sk.rest_joints.rows() == k_count, ErrorKind::invalid_argument,
            "skeleton rest joints are not localized");

    JointTransforms out;
    out.global.resize(static_cast<std::size_t>(k_count));
    out.rest_relative.resize(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const int p = sk.parents[ku];
        const Eigen::Matrix3d r = rodrigues(joint_angle(pose, k));
        const Eigen::Vector3d jk = sk.rest_joints.row(k).transpose();

        Eigen::Isometry3d local = Eigen::Isometry3d::Identity();
        local.linear() = r;
        local.translation() = p < 0 ? jk : Eigen::Vector3d(jk - sk.rest_joints.row(p).transpose());
        out.global[ku] = p < 0 ? local : out.global[static_cast<std::size_t>(p)] * local;

        // rotation about the rest joint location; identity (exactly) at rest
        Eigen::Isometry3d about = Eigen::Isometry3d::Identity();
        about.linear() = r;
        about.translation() = jk - r * jk;
        out.rest_relative[ku] =
            p < 0 ? about : out.rest_relative[static_cast<std::size_t>(p)] * about;
    }
    return out;
}

// v' = sum_k w_ik G'_k v, evaluated as v + sum_k w_ik (G'_k v - v).
inline Mesh apply_lbs(const Mesh& mesh, const Skeleton& sk, const JointTransforms& tf) {
    require(sk.weights.rows() == mesh.vertices.rows(), ErrorKind::dimension_mismatch,
            "weights cover " + std::to_string(sk.weights.rows()) + " vertices, mesh has " +
                std::to_string(mesh.vertices.rows()));
    require(sk.weights.cols() == static_cast<Eigen::Index>(tf.rest_relative.size()),
            ErrorKind::dimension_mismatch, "weight columns differ from transform count");
    Mesh out = mesh;
    const auto k_count = sk.weights.cols();
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        const Eigen::Vector3d v = mesh.vertices.row(i).transpose();
        Eigen::Vector3d delta = Eigen::Vector3d::Zero();
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const double w = sk.weights(i, k);
            if (w == 0.0) continue;
            delta += w * (tf.rest_relative[static_cast<std::size_t>(k)] * v - v);
        }
        out.vertices.row(i) = (v + delta).transpose();
    }
    return out;
}

inline Mesh pose_mesh(const Mesh& shaped, const Skeleton& sk, const PoseParams& pose) {
    return apply_lbs(shaped, sk, forward_kinematics(sk, pose));
}

// Posed joint locations: G'_k applied to rest joint k.
inline JointPoints extract_joints(const Skeleton& sk, const JointTransforms& tf) {
    JointPoints out(sk.joint_count(), 3);
    for (int k = 0; k < sk.joint_count(); ++k)
        out.row(k) =
            (tf.rest_relative[static_cast<std::size_t>(k)] * Eigen::Vector3d(sk.rest_joints.row(k)))
                .transpose();
    return out;
}

struct RetargetPair {
    std::string src;
    std::string dst;
    // Fixed rotation C (axis-angle) relating the two joint frames; the
    // retargeted rotation is C R_src C^T.
    Eigen::Vector3d conjugate = Eigen::Vector3d::Zero();
};

struct RetargetMap {
    std::vector<std::string> src_joints;
    std::vector<RetargetPair> pairs;
};

// C R(theta) C^T = R(C theta), so conjugation acts on the axis-angle vector
// by rotating it. Target joints without a pair get zero rotation.
inline PoseParams retarget_pose(const PoseParams& src_pose, const RetargetMap& map,
                                const std::vector<std::string>& dst_joints) {
    require(src_pose.size() == 3 * static_cast<Eigen::Index>(map.src_joints.size()),
            ErrorKind::dimension_mismatch, "source pose length does not match source joints");
    const auto find = [](const std::vector<std::string>& names, const std::string& n,
                         const char* side) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == n) return static_cast<int>(i);
        throw Error(ErrorKind::unknown_name, std::string("unknown ") + side + " joint " + n);
    };
    PoseParams out = PoseParams::Zero(3 * static_cast<Eigen::Index>(dst_joints.size()));
    std::vector<bool> seen(dst_joints.size(), false);
    for (const auto& pair : map.pairs) {
        const int s = find(map.src_joints, pair.src, "source");
        const int d = find(dst_joints, pair.dst, "target");
        require(!seen[static_cast<std::size_t>(d)], ErrorKind::invalid_argument,
                "target joint " + pair.dst + " mapped twice");
        seen[static_cast<std::size_t>(d)] = true;
        out.segment<3>(3 * d) = rodrigues(pair.conjugate) * joint_angle(src_pose, s);
    }
    return out;
}

// Mapping that undoes `map` (source and target swapped, conjugation inverted).
inline RetargetMap inverse_map(const RetargetMap& map, const std::vector<std::string>& dst_joints) {
    RetargetMap inv;
    inv.src_joints = dst_joints;
    for (const auto& p : map.pairs) inv.pairs.push_back({p.dst, p.src, -p.conjugate});
    return inv;
}

}  // namespace bipar
