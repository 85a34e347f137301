#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include "bipar/metrics.hpp"
#include "test_support.hpp"

using namespace bipar;

namespace {

JointPoints random_points(Xorshift64Star& rng, int n) {
    JointPoints p(n, 3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
    return p;
}

}  // namespace

TEST(Procrustes, MatchesUmeyama) {
    Xorshift64Star rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const JointPoints a = random_points(rng, 23);
        JointPoints b = random_points(rng, 23);
        b += 0.3 * a;
        const Similarity s = procrustes(a, b);
        const Eigen::Matrix4d ref = Eigen::umeyama(a.transpose(), b.transpose(), true);
        Eigen::Matrix4d got = Eigen::Matrix4d::Identity();
        got.topLeftCorner<3, 3>() = s.scale * s.rotation;
        got.topRightCorner<3, 1>() = s.translation;
        EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);
    }
}

TEST(Procrustes, RecoversSimilarityCopy) {
    Xorshift64Star rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const JointPoints a = random_points(rng, 23);
        const Eigen::Matrix3d r = fixture::random_rotation(rng);
        const double scale = rng.uniform(0.2, 5.0);
        const Eigen::RowVector3d t(rng.normal(), rng.normal(), rng.normal());
        const JointPoints b = (scale * a * r.transpose()).rowwise() + t;
        const ReconstructionMetrics m = eval_metrics(a, b, a, b);
        EXPECT_LE(m.pa_mpjpe, 1e-9);
        const Similarity s = procrustes(a, b);
        EXPECT_NEAR(s.scale, scale, 1e-10);
        EXPECT_LE((s.rotation - r).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Procrustes, ReflectionIsNotUsed) {
    Xorshift64Star rng(3);
    const JointPoints a = random_points(rng, 10);
    JointPoints b = a;
    b.col(0) *= -1.0;
    EXPECT_NEAR(procrustes(a, b).rotation.determinant(), 1.0, 1e-12);
}

TEST(EvalMetrics, KnownValues) {
    JointPoints a = JointPoints::Zero(2, 3), b = JointPoints::Zero(2, 3);
    b(0, 0) = 3.0;
    b(1, 1) = 4.0;
    const ReconstructionMetrics m = eval_metrics(a, b, a, b);
    EXPECT_EQ(m.mpve, 3.5);
    EXPECT_EQ(m.mpjpe, 3.5);
    EXPECT_THROW(eval_metrics(a, JointPoints::Zero(3, 3), a, b), Error);
}

TEST(EvalMetrics, AlignedErrorNotAboveRaw) {
    Xorshift64Star rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const JointPoints gt = random_points(rng, 23);
        JointPoints pred = gt + 0.05 * random_points(rng, 23);
        pred = (pred * fixture::random_rotation(rng).transpose()).rowwise() + Eigen::RowVector3d(1, 2, 3);
        const ReconstructionMetrics m = eval_metrics(pred, gt, pred, gt);
        EXPECT_LE(m.pa_mpjpe, m.mpjpe);
    }
}
