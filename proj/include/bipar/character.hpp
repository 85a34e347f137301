#pragma once

#include "bipar/mesh.hpp"
#include "bipar/pose.hpp"
#include "bipar/rig.hpp"
#include "bipar/shape_space.hpp"

namespace bipar {

// Shape space plus the rig that poses it. Rest joints are not stored: they
// are localized on every shaped mesh from the landmark patches.
struct Character {
    ShapeModel shape;
    Skeleton skeleton;  // parents, weights, joint_patches
    LandmarkSet landmarks;
};

inline void validate(const Character& c) {
    validate(c.skeleton);
    validate(c.landmarks, c.shape.vertex_count());
    require(c.skeleton.weights.rows() == c.shape.vertex_count(), ErrorKind::dimension_mismatch,
            "skeleton weights cover " + std::to_string(c.skeleton.weights.rows()) +
                " vertices, shape model has " + std::to_string(c.shape.vertex_count()));
}

struct PosedCharacter {
    Mesh shaped;
    Skeleton skeleton;  // with rest joints of `shaped`
    JointTransforms transforms;
    Mesh posed;
    JointPoints joints;  // posed joint locations
};

// pose(shape(beta), theta) with joints localized on the shaped mesh.
inline PosedCharacter pose_character(const Character& c, const ShapeParams& beta,
                                     const PoseParams& theta) {
    PosedCharacter out;
    out.shaped = eval_shape(c.shape, beta);
    out.skeleton = compute_rest_joints(out.shaped, c.landmarks, c.skeleton);
    out.transforms = forward_kinematics(out.skeleton, theta);
    out.posed = apply_lbs(out.shaped, out.skeleton, out.transforms);
    out.joints = extract_joints(out.skeleton, out.transforms);
    return out;
}

}  // namespace bipar
