#include <gtest/gtest.h>

#include "bipar/rig.hpp"
#include "test_support.hpp"

using namespace bipar;

namespace {

Mesh points_mesh(const Points& p) { return make_mesh(p, Faces(0, 3)); }

}  // namespace

TEST(JointFromPatches, UnionBoundingBoxCenter) {
    Points p(4, 3);
    p << 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 4, 0;
    LandmarkSet lm;
    lm.patches["a"] = {0, 1};
    lm.patches["b"] = {2, 3};
    const Eigen::Vector3d j = joint_from_patches(points_mesh(p), lm, "a", "b");
    EXPECT_EQ(j, Eigen::Vector3d(1, 2, 0));
}

TEST(JointFromPatches, SinglePoint) {
    Points p(1, 3);
    p << 0.3, -1.7, 2.5;
    LandmarkSet lm;
    lm.patches["a"] = {0};
    lm.patches["b"] = {0};
    EXPECT_EQ(joint_from_patches(points_mesh(p), lm, "a", "b"), Eigen::Vector3d(0.3, -1.7, 2.5));
}

TEST(JointFromPatches, Errors) {
    Points p(2, 3);
    p.setZero();
    LandmarkSet lm;
    lm.patches["a"] = {0};
    lm.patches["empty"] = {};
    try {
        joint_from_patches(points_mesh(p), lm, "a", "missing");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unknown_name);
    }
    EXPECT_THROW(joint_from_patches(points_mesh(p), lm, "a", "empty"), Error);
}

TEST(JointFromPatches, MatchesBruteForceScan) {
    Xorshift64Star rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Points p(60, 3);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(-3, 3);
        LandmarkSet lm;
        for (const char* name : {"a", "b"}) {
            const int count = 1 + static_cast<int>(rng.uniform() * 10);
            for (int c = 0; c < count; ++c) lm.patches[name].push_back(static_cast<int>(rng.uniform() * 60));
        }
        std::vector<int> all = lm.patches["a"];
        all.insert(all.end(), lm.patches["b"].begin(), lm.patches["b"].end());
        Eigen::Vector3d expect;
        for (int axis = 0; axis < 3; ++axis) {
            double lo = p(all[0], axis), hi = lo;
            for (int i : all) {
                if (p(i, axis) < lo) lo = p(i, axis);
                if (p(i, axis) > hi) hi = p(i, axis);
            }
            expect(axis) = (lo + hi) / 2;
        }
        EXPECT_EQ(joint_from_patches(points_mesh(p), lm, "a", "b"), expect);
    }
}

TEST(ComputeRestJoints, TemplateMatchesGenerator) {
    const auto& t = fixture::family_template();
    const Skeleton sk = compute_rest_joints(t.mesh, t.landmarks, t.skeleton);
    EXPECT_LE((sk.rest_joints - t.skeleton.rest_joints).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ComputeRestJoints, SamplesMatchGenerator) {
    const auto& t = fixture::family_template();
    for (const auto& s : fixture::family_samples()) {
        const Skeleton sk = compute_rest_joints(s.mesh, t.landmarks, t.skeleton);
        EXPECT_LE((sk.rest_joints - s.joints).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(ComputeRestJoints, TranslationAndScaleEquivariant) {
    const auto& t = fixture::family_template();
    const Skeleton base = compute_rest_joints(t.mesh, t.landmarks, t.skeleton);
    Mesh moved = t.mesh;
    const Eigen::RowVector3d shift(0.3, -1.2, 4.0);
    moved.vertices.rowwise() += shift;
    const Skeleton a = compute_rest_joints(moved, t.landmarks, t.skeleton);
    EXPECT_LE(((base.rest_joints.rowwise() + shift) - a.rest_joints).cwiseAbs().maxCoeff(), 1e-12);
    Mesh scaled = t.mesh;
    scaled.vertices *= 2.5;
    const Skeleton b = compute_rest_joints(scaled, t.landmarks, t.skeleton);
    EXPECT_LE((2.5 * base.rest_joints - b.rest_joints).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DefaultSkeleton, StructureAndPoseDimension) {
    const Skeleton sk = default_skeleton();
    EXPECT_EQ(sk.joint_count(), 23);
    EXPECT_EQ(3 * sk.joint_count(), 69);
    EXPECT_NO_THROW(validate(sk));
    int roots = 0;
    for (int k = 0; k < sk.joint_count(); ++k) {
        if (sk.parents[static_cast<std::size_t>(k)] < 0) ++roots;
        EXPECT_TRUE(sk.is_ancestor_or_self(0, k));
    }
    EXPECT_EQ(roots, 1);
    EXPECT_EQ(sk.joint_names[0], "pelvis");
    EXPECT_EQ(sk.parents[static_cast<std::size_t>(sk.index_of("elbow_L"))], sk.index_of("shoulder_L"));
    EXPECT_EQ(sk.joint_patches[5].first, "head_a");
    EXPECT_THROW(sk.index_of("nope"), Error);
}

TEST(Skeleton, ValidateRejectsBadTrees) {
    Skeleton sk = default_skeleton();
    sk.parents[3] = 7;
    EXPECT_THROW(validate(sk), Error);
    Skeleton two_roots = default_skeleton();
    two_roots.parents[4] = -1;
    EXPECT_THROW(validate(two_roots), Error);
}

TEST(Skeleton, ValidateChecksWeights) {
    Skeleton sk = default_skeleton();
    sk.weights = WeightMatrix::Zero(3, 23);
    sk.weights(0, 0) = 1.0;
    sk.weights(1, 4) = 0.5;
    sk.weights(1, 5) = 0.5;
    sk.weights(2, 2) = 1.0;
    EXPECT_NO_THROW(validate(sk));
    sk.weights(2, 2) = 0.9;
    EXPECT_THROW(validate(sk), Error);
    sk.weights(2, 2) = 1.1;
    sk.weights(2, 3) = -0.1;
    EXPECT_THROW(validate(sk), Error);
}

TEST(Skeleton, NormalizeWeights) {
    WeightMatrix w(3, 4);
    w << 2, 2, 0, 0, 0, 0, 0, 0, -1, 3, 0, 1;
    normalize_weights(w);
    EXPECT_DOUBLE_EQ(w(0, 0), 0.5);
    EXPECT_EQ(w(1, 0), 1.0);
    EXPECT_EQ(w(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(w(2, 1), 0.75);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(w.row(i).sum(), 1.0, 1e-15);
}

TEST(LandmarkSet, Validate) {
    LandmarkSet lm;
    lm.patches["a"] = {0, 1};
    EXPECT_NO_THROW(validate(lm, 2));
    EXPECT_THROW(validate(lm, 1), Error);
    lm.patches["b"] = {};
    EXPECT_THROW(validate(lm, 2), Error);
}
