#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bipar/mesh.hpp"

namespace bipar {

using JointPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDefaultJointCount = 23;

// Named vertex-index patches on the shared topology.
struct LandmarkSet {
    std::map<std::string, std::vector<int>> patches;

    const std::vector<int>& patch(const std::string& name) const {
        const auto it = patches.find(name);
        if (it == patches.end()) throw Error(ErrorKind::unknown_name, "unknown patch " + name);
        return it->second;
    }
};

inline void validate(const LandmarkSet& lm, Eigen::Index vertex_count) {
    for (const auto& [name, idx] : lm.patches) {
        require(!idx.empty(), ErrorKind::invalid_argument, "patch " + name + " is empty");
        for (int i : idx)
            require(i >= 0 && i < vertex_count, ErrorKind::index_out_of_range,
                    "patch " + name + " references vertex " + std::to_string(i));
    }
}

struct Skeleton {
    std::vector<std::string> joint_names;
    // parents[k] < k for every non-root joint; the root has -1.
    std::vector<int> parents;
    // Rest (T-pose) joint locations, K x 3. Empty until localized.
    JointPoints rest_joints;
    // Skinning weights, vertex_count x K. Empty until assigned.
    WeightMatrix weights;
    // Landmark patches that localize each joint.
    std::vector<std::pair<std::string, std::string>> joint_patches;

    int joint_count() const { return static_cast<int>(parents.size()); }

    int index_of(const std::string& name) const {
        for (std::size_t k = 0; k < joint_names.size(); ++k)
            if (joint_names[k] == name) return static_cast<int>(k);
        throw Error(ErrorKind::unknown_name, "unknown joint " + name);
    }

    bool is_ancestor_or_self(int ancestor, int k) const {
        for (; k >= 0; k = parents[static_cast<std::size_t>(k)])
            if (k == ancestor) return true;
        return false;
    }
};

// Checks tree structure, and weights when present.
inline void validate(const Skeleton& sk) {
    const auto k = sk.parents.size();
    require(sk.joint_names.size() == k, ErrorKind::dimension_mismatch,
            "joint_names and parents differ in length");
    require(sk.joint_patches.empty() || sk.joint_patches.size() == k,
            ErrorKind::dimension_mismatch, "joint_patches and parents differ in length");
    int roots = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const int p = sk.parents[j];
        if (p == -1) {
            ++roots;
            continue;
        }
        require(p >= 0 && p < static_cast<int>(j), ErrorKind::invalid_argument,
                "joint " + sk.joint_names[j] + " must have a parent with a smaller index");
    }
    require(roots == 1 && (k == 0 || sk.parents[0] == -1), ErrorKind::invalid_argument,
            "skeleton needs exactly one root at index 0");
    if (sk.rest_joints.size() > 0)
        require(sk.rest_joints.rows() == static_cast<Eigen::Index>(k),
                ErrorKind::dimension_mismatch, "rest_joints row count differs from joint count");
    if (sk.weights.size() > 0) {
        require(sk.weights.cols() == static_cast<Eigen::Index>(k), ErrorKind::dimension_mismatch,
                "weight column count differs from joint count");
        for (Eigen::Index i = 0; i < sk.weights.rows(); ++i) {
            require((sk.weights.row(i).array() >= 0.0).all(), ErrorKind::invalid_argument,
                    "negative skinning weight on vertex " + std::to_string(i));
            require(std::abs(sk.weights.row(i).sum() - 1.0) <= 1e-9, ErrorKind::invalid_argument,
                    "skinning weights of vertex " + std::to_string(i) + " do not sum to 1");
        }
    }
}

// Rescales every weight row to sum to one. Rows that are all zero are bound
// to the root.
inline void normalize_weights(WeightMatrix& w) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w.row(i) = w.row(i).cwiseMax(0.0);
        const double s = w.row(i).sum();
        if (s > 0.0) {
            w.row(i) /= s;
        } else if (w.cols() > 0) {
            w(i, 0) = 1.0;
        }
    }
}

// pelvis-rooted biped; patches are named "<joint>_a" and "<joint>_b".
inline Skeleton default_skeleton() {
    Skeleton sk;
    const std::pair<const char*, const char*> joints[] = {
        {"pelvis", nullptr},      {"spine1", "pelvis"},      {"spine2", "spine1"},
        {"chest", "spine2"},      {"neck", "chest"},         {"head", "neck"},
        {"tail_root", "pelvis"},  {"clavicle_L", "chest"},   {"shoulder_L", "clavicle_L"},
        {"elbow_L", "shoulder_L"}, {"wrist_L", "elbow_L"},   {"clavicle_R", "chest"},
        {"shoulder_R", "clavicle_R"}, {"elbow_R", "shoulder_R"}, {"wrist_R", "elbow_R"},
        {"hip_L", "pelvis"},      {"knee_L", "hip_L"},       {"ankle_L", "knee_L"},
        {"toe_L", "ankle_L"},     {"hip_R", "pelvis"},       {"knee_R", "hip_R"},
        {"ankle_R", "knee_R"},    {"toe_R", "ankle_R"},
    };
    for (const auto& [name, parent] : joints) {
        sk.joint_names.emplace_back(name);
        sk.parents.push_back(parent ? sk.index_of(parent) : -1);
        sk.joint_patches.emplace_back(std::string(name) + "_a", std::string(name) + "_b");
    }
    return sk;
}

// Center of the axis-aligned bounding box of the union of both patches.
inline Eigen::Vector3d joint_from_patches(const Mesh& mesh, const LandmarkSet& lm,
                                          const std::string& patch_a, const std::string& patch_b) {
    const auto& a = lm.patch(patch_a);
    const auto& b = lm.patch(patch_b);
    require(!a.empty(), ErrorKind::invalid_argument, "patch " + patch_a + " is empty");
    require(!b.empty(), ErrorKind::invalid_argument, "patch " + patch_b + " is empty");
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto* patch : {&a, &b}) {
        for (int i : *patch) {
            require(i >= 0 && i < mesh.vertices.rows(), ErrorKind::index_out_of_range,
                    "landmark vertex " + std::to_string(i) + " out of range");
            const Eigen::Vector3d p = mesh.vertices.row(i).transpose();
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    return 0.5 * (lo + hi);
}

inline Skeleton compute_rest_joints(const Mesh& mesh, const LandmarkSet& lm, Skeleton sk) {
    require(sk.joint_patches.size() == sk.parents.size(), ErrorKind::dimension_mismatch,
            "skeleton has no patch pair for every joint");
    sk.rest_joints.resize(sk.joint_count(), 3);
    for (int k = 0; k < sk.joint_count(); ++k) {
        const auto& [pa, pb] = sk.joint_patches[static_cast<std::size_t>(k)];
        sk.rest_joints.row(k) = joint_from_patches(mesh, lm, pa, pb).transpose();
    }
    return sk;
}

}  // namespace bipar
