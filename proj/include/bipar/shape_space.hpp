#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bipar/mesh.hpp"
#include "bipar/pca.hpp"

namespace bipar {

inline constexpr int kDefaultShapeComponents = 100;

// Linear shape space: vertices = mean + sum_i beta_i * component_i, with
// components stored as rows over the flattened 3N vertex coordinates.
struct ShapeModel {
    Mesh mean;
    RowMatrix components;
    Eigen::VectorXd singular_values;
    Eigen::Index training_count = 0;
    bool clamped = false;

    Eigen::Index n_components() const { return components.rows(); }
    Eigen::Index vertex_count() const { return mean.vertices.rows(); }

    // Per-component standard deviation of the training scores.
    Eigen::VectorXd sigma() const {
        if (training_count < 2) return Eigen::VectorXd::Zero(singular_values.size());
        return singular_values / std::sqrt(static_cast<double>(training_count - 1));
    }
};

using ShapeParams = Eigen::VectorXd;

inline ShapeModel fit_pca(std::span<const Mesh> meshes, Eigen::Index n_components) {
    require(meshes.size() >= 2, ErrorKind::invalid_argument, "PCA needs at least 2 meshes");
    const Mesh& ref = meshes.front();
    validate(ref);
    for (std::size_t i = 1; i < meshes.size(); ++i) {
        const auto rep = check_consistency(ref, meshes[i]);
        if (!rep)
            throw Error(ErrorKind::topology_mismatch,
                        "mesh " + std::to_string(i) + " differs from mesh 0: " + rep.report);
    }
    const Eigen::Index dim = 3 * ref.vertices.rows();
    RowMatrix data(static_cast<Eigen::Index>(meshes.size()), dim);
    for (std::size_t i = 0; i < meshes.size(); ++i)
        data.row(static_cast<Eigen::Index>(i)) = flat(meshes[i].vertices).transpose();

    PcaBasis basis = fit_pca_basis(data, n_components);

    ShapeModel model;
    model.mean = ref;
    model.mean.vertices = unflat(basis.mean);
    model.components = std::move(basis.components);
    model.singular_values = std::move(basis.singular_values);
    model.training_count = basis.sample_count;
    model.clamped = basis.clamped;
    return model;
}

inline Mesh eval_shape(const ShapeModel& model, const ShapeParams& beta) {
    require(beta.size() == model.n_components(), ErrorKind::dimension_mismatch,
            "expected " + std::to_string(model.n_components()) + " shape coefficients, got " +
                std::to_string(beta.size()));
    Mesh out = model.mean;
    Eigen::Map<Eigen::VectorXd> v(out.vertices.data(), out.vertices.size());
    v += model.components.transpose() * beta;
    return out;
}

inline ShapeParams project_shape(const ShapeModel& model, const Mesh& mesh) {
    const auto rep = check_consistency(model.mean, mesh);
    if (!rep) throw Error(ErrorKind::topology_mismatch, "mesh does not match model: " + rep.report);
    return model.components * (flat(mesh.vertices) - flat(model.mean.vertices));
}

inline ShapeParams interpolate_params(const ShapeParams& a, const ShapeParams& b, double t) {
    require(a.size() == b.size(), ErrorKind::dimension_mismatch,
            "cannot interpolate parameter vectors of different length");
    if (t == 0.0) return a;
    if (t == 1.0) return b;
    return (1.0 - t) * a + t * b;
}

}  // namespace bipar
