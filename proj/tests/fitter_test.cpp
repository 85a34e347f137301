#include <gtest/gtest.h>

#include <numbers>

#include "bipar/fitter.hpp"
#include "test_support.hpp"

using namespace bipar;

namespace {

const Character& character() { return fixture::family_character(); }

FitParams zero_params() {
    return {ShapeParams::Zero(character().shape.n_components()), PoseParams::Zero(69)};
}

FitParams random_params(Xorshift64Star& rng, double beta_scale, double max_angle) {
    return {fixture::random_beta(rng, character().shape, beta_scale), fixture::random_pose(rng, 23, max_angle)};
}

// Central differences of the smoothed objective, one coordinate at a time.
Eigen::VectorXd numeric_gradient(const FitProblem& p, const FitParams& at, double h) {
    const Eigen::Index nb = at.beta.size();
    Eigen::VectorXd x(nb + at.theta.size());
    x << at.beta, at.theta;
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        const double fa = evaluate_loss(p, {a.head(nb), a.tail(a.size() - nb)}).smoothed_total;
        const double fb = evaluate_loss(p, {b.head(nb), b.tail(b.size() - nb)}).smoothed_total;
        g(i) = (fa - fb) / (2 * h);
    }
    return g;
}

double worst_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i)
        if (std::abs(analytic(i)) > 1e-8)
            worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / std::abs(analytic(i)));
    return worst;
}

}  // namespace

TEST(Losses, ParameterL1) {
    FitParams a{(ShapeParams(2) << 1, -2).finished(), (PoseParams(3) << 0.5, 0, 0).finished()};
    FitParams b{ShapeParams::Zero(2), PoseParams::Zero(3)};
    EXPECT_EQ(loss_para(a, b), 3.5);
    EXPECT_EQ(loss_para(a, a), 0.0);
    EXPECT_THROW(loss_para(a, FitParams{ShapeParams::Zero(3), PoseParams::Zero(3)}), Error);
}

TEST(Losses, PoseLossIsChordLength) {
    const Character& c = character();
    const Skeleton sk = compute_rest_joints(c.shape.mean, c.landmarks, c.skeleton);
    const int sh = sk.index_of("shoulder_L");
    const double phi = 0.8;
    PoseParams theta = PoseParams::Zero(69);
    theta.segment<3>(3 * sh) = Eigen::Vector3d(0, 0, phi);
    // every strict descendant travels along a circle about the z axis through the shoulder
    double sq = 0.0;
    for (int k = 0; k < 23; ++k) {
        if (k == sh || !sk.is_ancestor_or_self(sh, k)) continue;
        const Eigen::Vector3d d = sk.rest_joints.row(k).transpose() - sk.rest_joints.row(sh).transpose();
        const double r = d.head<2>().norm();
        sq += std::pow(2.0 * r * std::sin(phi / 2.0), 2);
    }
    const ShapeParams beta = ShapeParams::Zero(c.shape.n_components());
    EXPECT_NEAR(loss_pose(theta, PoseParams::Zero(69), beta, c), std::sqrt(sq), 1e-12);
    EXPECT_EQ(loss_pose(theta, theta, beta, c), 0.0);
}

TEST(Losses, ShapeLossAtRestIsVertexDistance) {
    const Character& c = character();
    ShapeParams a = ShapeParams::Zero(c.shape.n_components()), b = a;
    b(0) = 1.5;
    // unit-norm component
    EXPECT_NEAR(loss_shape(a, b, PoseParams::Zero(69), c), 1.5, 1e-12);
    Xorshift64Star rng(1);
    const PoseParams pose = fixture::random_pose(rng, 23, 0.5);
    EXPECT_GT(loss_shape(a, b, pose, c), 0.0);
    EXPECT_EQ(loss_shape(b, b, pose, c), 0.0);
}

TEST(Losses, EvaluateLossReportsRawTerms) {
    Xorshift64Star rng(2);
    const FitParams gt = random_params(rng, 1.0, 0.4);
    const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
    const FitProblem p{character(), st.posed.vertices, st.joints, gt};
    const FitParams at = random_params(rng, 1.0, 0.4);
    const LossTerms t = evaluate_loss(p, at);
    const PosedCharacter sa = pose_character(character(), at.beta, at.theta);
    EXPECT_NEAR(t.para, loss_para(at, gt), 1e-12);
    EXPECT_NEAR(t.shape, (sa.posed.vertices - st.posed.vertices).norm(), 1e-12);
    EXPECT_NEAR(t.pose, (sa.joints - st.joints).norm(), 1e-12);
    const LossTerms z = evaluate_loss(p, gt);
    EXPECT_EQ(z.para, 0.0);
    EXPECT_EQ(z.shape, 0.0);
    EXPECT_EQ(z.pose, 0.0);
    EXPECT_EQ(z.smoothed_total, 0.0);
}

TEST(Huber, ValueSlopeAndCurvature) {
    using detail::huber;
    using detail::huber_grad;
    EXPECT_EQ(huber(0.0), 0.0);
    EXPECT_NEAR(huber(1.0), 1.0 - kHuberDelta / 2, 1e-15);
    EXPECT_NEAR(huber(kHuberDelta / 2), kHuberDelta / 8, 1e-18);
    EXPECT_EQ(huber_grad(2.0), 1.0);
    EXPECT_EQ(huber_grad(-2.0), -1.0);
    EXPECT_NEAR(huber_grad(kHuberDelta / 4), 0.25, 1e-12);
    EXPECT_EQ(detail::huber_curv(1.0), 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
    Xorshift64Star rng(3);
    for (int trial = 0; trial < 6; ++trial) {
        const FitParams gt = random_params(rng, 2.0, 0.6);
        const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
        FitProblem p{character(), st.posed.vertices, st.joints, std::nullopt};
        p.optimize_shape = trial % 3 != 1;
        p.optimize_pose = trial % 3 != 0;
        FitParams at = random_params(rng, 2.0, 0.6);
        if (!p.optimize_shape) at.beta = gt.beta;
        if (!p.optimize_pose) at.theta = gt.theta;
        const FitParams g = gradient(p, at);
        Eigen::VectorXd ga(g.beta.size() + g.theta.size());
        ga << g.beta, g.theta;
        EXPECT_LE(worst_relative_error(ga, numeric_gradient(p, at, 1e-6)), 1e-4) << "trial " << trial;
    }
}

TEST(Gradient, IncludesParameterTerm) {
    Xorshift64Star rng(4);
    const FitParams gt = random_params(rng, 1.0, 0.5);
    const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
    const FitProblem p{character(), std::nullopt, st.joints, gt};
    FitParams at = gt;
    at.theta.array() += 0.05;
    at.beta(0) += 0.05;
    const FitParams g = gradient(p, at);
    Eigen::VectorXd ga(g.beta.size() + g.theta.size());
    ga << g.beta, g.theta;
    EXPECT_LE(worst_relative_error(ga, numeric_gradient(p, at, 1e-6)), 1e-4);
}

TEST(Fit, ConvergedAtGroundTruth) {
    Xorshift64Star rng(5);
    const FitParams gt = random_params(rng, 1.0, 0.5);
    const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
    const FitProblem p{character(), st.posed.vertices, st.joints, std::nullopt};
    const FitResult r = fit(p, gt);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.params.beta, gt.beta);
    EXPECT_EQ(r.params.theta, gt.theta);
}

TEST(Fit, RecoversParametersFromZero) {
    Xorshift64Star rng(6);
    for (int trial = 0; trial < 3; ++trial) {
        const FitParams gt = random_params(rng, 2.0, 0.6);
        const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
        const FitProblem p{character(), st.posed.vertices, st.joints, std::nullopt};
        const FitResult r = fit(p, zero_params());
        EXPECT_TRUE(r.converged);
        EXPECT_LE((r.params.beta - gt.beta).lpNorm<Eigen::Infinity>(),
                  1e-2 * std::max(1.0, gt.beta.lpNorm<Eigen::Infinity>()));
        EXPECT_LE((r.params.theta - gt.theta).lpNorm<Eigen::Infinity>(), 1e-2);
        const PosedCharacter got = pose_character(character(), r.params.beta, r.params.theta);
        const ReconstructionMetrics m = eval_metrics(got.posed.vertices, st.posed.vertices, got.joints, st.joints);
        EXPECT_LE(m.mpve, 1e-6);
        EXPECT_LE(m.mpjpe, 1e-6);
    }
}

TEST(Fit, NoisyJointTargets) {
    Xorshift64Star rng(7);
    const FitParams gt = random_params(rng, 2.0, 0.6);
    const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
    JointPoints noisy = st.joints;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += 1e-3 * rng.normal();
    const FitProblem p{character(), std::nullopt, noisy, std::nullopt};
    const FitResult r = fit(p, zero_params());
    const JointPoints got = pose_character(character(), r.params.beta, r.params.theta).joints;
    EXPECT_LE(std::sqrt((got - st.joints).rowwise().squaredNorm().mean()), 5e-3);
}

TEST(Fit, GradientDescentIsMonotone) {
    Xorshift64Star rng(8);
    const FitParams gt = random_params(rng, 1.0, 0.3);
    const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
    const FitProblem p{character(), std::nullopt, st.joints, std::nullopt};
    FitConfig cfg;
    cfg.method = FitMethod::gradient_descent;
    double prev = evaluate_loss(p, zero_params()).smoothed_total;
    for (int k = 1; k <= 6; ++k) {
        cfg.max_iters = k;
        const FitResult r = fit(p, zero_params(), cfg);
        EXPECT_LE(r.loss.smoothed_total, prev);
        prev = r.loss.smoothed_total;
    }
    EXPECT_LT(prev, evaluate_loss(p, zero_params()).smoothed_total);
}

TEST(Fit, MasksFreezeParameters) {
    Xorshift64Star rng(9);
    const FitParams gt = random_params(rng, 1.0, 0.4);
    const PosedCharacter st = pose_character(character(), gt.beta, gt.theta);
    FitProblem p{character(), st.posed.vertices, std::nullopt, std::nullopt};
    p.optimize_shape = false;
    FitParams init = zero_params();
    init.beta = gt.beta;
    const FitResult r = fit(p, init);
    EXPECT_EQ(r.params.beta, gt.beta);
    EXPECT_LE((r.params.theta - gt.theta).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Fit, ParameterTermAloneRecoversGroundTruth) {
    Xorshift64Star rng(10);
    const FitParams gt = random_params(rng, 1.0, 0.4);
    const FitProblem p{character(), std::nullopt, std::nullopt, gt};
    const FitResult r = fit(p, zero_params());
    EXPECT_LE((r.params.theta - gt.theta).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_LE((r.params.beta - gt.beta).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Fit, ErrorsAndDivergence) {
    const FitProblem none{character(), std::nullopt, std::nullopt, std::nullopt};
    try {
        fit(none, zero_params());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
    const FitProblem wrong{character(), std::nullopt, JointPoints::Zero(5, 3), std::nullopt};
    EXPECT_THROW(fit(wrong, zero_params()), Error);
    JointPoints bad = JointPoints::Zero(23, 3);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    const FitProblem nan{character(), std::nullopt, bad, std::nullopt};
    try {
        fit(nan, zero_params());
        FAIL();
    } catch (const FitDiverged& e) {
        EXPECT_EQ(e.kind(), ErrorKind::diverged);
        EXPECT_EQ(e.last_good().params.beta, zero_params().beta);
    }
}
