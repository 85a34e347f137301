#include <gtest/gtest.h>

#include "bipar/shape_space.hpp"
#include "test_support.hpp"

using namespace bipar;

namespace {

Mesh constant_mesh(int n, double value) {
    Points v = Points::Constant(n, 3, value);
    Faces f(1, 3);
    f << 0, 1, 2;
    return make_mesh(v, f, UVs::Zero(n, 2));
}

double max_orthonormality_error(const RowMatrix& c) {
    return (c * c.transpose() - Eigen::MatrixXd::Identity(c.rows(), c.rows())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(ShapePca, TwoMeshOracle) {
    const std::vector<Mesh> ms{constant_mesh(4, 0.0), constant_mesh(4, 1.0)};
    const ShapeModel m = fit_pca(ms, 1);
    EXPECT_TRUE((m.mean.vertices.array() == 0.5).all());
    // oracle: power iteration on the hand-built centered 2 x 12 matrix
    Eigen::MatrixXd centered(2, 12);
    centered.row(0).setConstant(-0.5);
    centered.row(1).setConstant(0.5);
    const auto [sv, vecs] = fixture::power_svd(centered, 1);
    EXPECT_NEAR(m.singular_values(0), sv(0), 1e-12);
    EXPECT_NEAR(m.singular_values(0), std::sqrt(2.0) * std::sqrt(12.0) * 0.5, 1e-12);
    const double dot = m.components.row(0).dot(vecs.row(0));
    EXPECT_NEAR(std::abs(dot), 1.0, 1e-12);
    EXPECT_LE((m.components.row(0).array() - 1.0 / std::sqrt(12.0)).abs().maxCoeff(), 1e-12);
}

TEST(ShapePca, MatchesPowerIterationOracleOnFamily) {
    const auto meshes = fixture::family_meshes(30);
    const ShapeModel m = fit_pca(meshes, 5);
    Eigen::MatrixXd data(30, 3 * meshes[0].vertices.rows());
    for (int i = 0; i < 30; ++i) data.row(i) = flat(meshes[static_cast<std::size_t>(i)].vertices).transpose();
    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    const auto [sv, vecs] = fixture::power_svd(centered, 5);
    for (int k = 0; k < 5; ++k) {
        EXPECT_NEAR(m.singular_values(k), sv(k), 1e-8 * sv(0));
        EXPECT_NEAR(std::abs(m.components.row(k).dot(vecs.row(k))), 1.0, 1e-8);
    }
}

TEST(ShapePca, IdenticalMeshesGiveZeroSingularValues) {
    const Mesh& t = fixture::family_template().mesh;
    const std::vector<Mesh> ms(5, t);
    const ShapeModel m = fit_pca(ms, 3);
    // the mean of equal values can differ from them by one rounding
    EXPECT_LE((m.mean.vertices - t.vertices).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE(m.singular_values.maxCoeff(), 1e-14);
    EXPECT_LE(max_orthonormality_error(m.components), 1e-12);
}

TEST(ShapePca, AffineFamilyResidual) {
    const auto meshes = fixture::family_meshes(200);
    const int f = fixture::family_config().factor_count;
    const ShapeModel m = fit_pca(meshes, f);
    double total = 0.0, residual = 0.0;
    for (const auto& mesh : meshes) {
        const Eigen::VectorXd d = flat(mesh.vertices) - flat(m.mean.vertices);
        total += d.squaredNorm();
        residual += (d - m.components.transpose() * (m.components * d)).squaredNorm();
    }
    EXPECT_LE(residual, 1e-9 * total);
}

TEST(ShapePca, OrthonormalSortedAndSigned) {
    const ShapeModel& m = fixture::family_character().shape;
    EXPECT_EQ(m.n_components(), 100);
    EXPECT_FALSE(m.clamped);
    EXPECT_LE(max_orthonormality_error(m.components), 1e-8);
    for (Eigen::Index k = 1; k < m.n_components(); ++k) EXPECT_LE(m.singular_values(k), m.singular_values(k - 1));
    for (Eigen::Index k = 0; k < m.n_components(); ++k) {
        Eigen::Index arg = 0;
        m.components.row(k).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(m.components(k, arg), 0.0);
    }
}

TEST(ShapePca, ClampsComponentCount) {
    const auto meshes = fixture::family_meshes(10);
    const ShapeModel m = fit_pca(meshes, 100);
    EXPECT_TRUE(m.clamped);
    EXPECT_EQ(m.n_components(), 9);
}

TEST(ShapePca, DeterministicGivenInputOrder) {
    const auto meshes = fixture::family_meshes(40);
    const ShapeModel a = fit_pca(meshes, 10), b = fit_pca(meshes, 10);
    EXPECT_EQ(a.components, b.components);
    EXPECT_EQ(a.singular_values, b.singular_values);
}

TEST(ShapePca, TopologyMismatchNamesMesh) {
    auto meshes = fixture::family_meshes(4);
    meshes[2].faces.conservativeResize(meshes[2].faces.rows() - 1, 3);
    try {
        fit_pca(meshes, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::topology_mismatch);
        EXPECT_NE(std::string(e.what()).find("mesh 2"), std::string::npos);
    }
}

TEST(EvalShape, ZeroIsMeanAndAxis) {
    const ShapeModel& m = fixture::family_character().shape;
    EXPECT_EQ(eval_shape(m, ShapeParams::Zero(m.n_components())).vertices, m.mean.vertices);
    ShapeParams b = ShapeParams::Zero(m.n_components());
    b(0) = 0.7;
    const Mesh out = eval_shape(m, b);
    EXPECT_LE((flat(out.vertices) - flat(m.mean.vertices) - 0.7 * m.components.row(0).transpose())
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
    EXPECT_THROW(eval_shape(m, ShapeParams::Zero(3)), Error);
}

TEST(EvalShape, AffineInParameters) {
    const ShapeModel& m = fixture::family_character().shape;
    Xorshift64Star rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const ShapeParams a = fixture::random_beta(rng, m, 3.0), b = fixture::random_beta(rng, m, 3.0);
        const double t = rng.uniform();
        const Mesh lhs = eval_shape(m, interpolate_params(a, b, t));
        const Points rhs = (1.0 - t) * eval_shape(m, a).vertices + t * eval_shape(m, b).vertices;
        EXPECT_LE((lhs.vertices - rhs).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(ProjectShape, RoundTrips) {
    const ShapeModel& m = fixture::family_character().shape;
    EXPECT_LE(project_shape(m, m.mean).cwiseAbs().maxCoeff(), 1e-12);
    ShapeParams b = ShapeParams::Zero(m.n_components());
    b(0) = 2.0;
    const ShapeParams back = project_shape(m, eval_shape(m, b));
    EXPECT_NEAR(back(0), 2.0, 1e-10);
    EXPECT_LE(back.tail(back.size() - 1).cwiseAbs().maxCoeff(), 1e-10);
    Xorshift64Star rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const ShapeParams r = fixture::random_vector(rng, m.n_components(), -1, 1);
        EXPECT_LE((project_shape(m, eval_shape(m, r)) - r).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(ProjectShape, TrainingMeshesRoundTripAtFullRank) {
    const ShapeModel& m = fixture::family_character().shape;
    for (const auto& s : fixture::family_samples()) {
        const Mesh back = eval_shape(m, project_shape(m, s.mesh));
        const double rmse = std::sqrt((back.vertices - s.mesh.vertices).rowwise().squaredNorm().mean());
        EXPECT_LE(rmse, 1e-6);
    }
}

TEST(InterpolateParams, EndpointsAndMidpoint) {
    const ShapeParams a = (ShapeParams(2) << 2, 0).finished(), b = (ShapeParams(2) << 0, 2).finished();
    EXPECT_EQ(interpolate_params(a, b, 0.0), a);
    EXPECT_EQ(interpolate_params(a, b, 1.0), b);
    EXPECT_EQ(interpolate_params(a, b, 0.5), (ShapeParams(2) << 1, 1).finished());
    EXPECT_THROW(interpolate_params(a, ShapeParams(3), 0.5), Error);
}
