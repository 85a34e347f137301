#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bipar/error.hpp"

namespace bipar {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Linear subspace fitted to rows of a data matrix. Shared by the shape and
// texture models.
struct PcaBasis {
    Eigen::VectorXd mean;           // dim
    RowMatrix components;           // n_components x dim, orthonormal rows
    Eigen::VectorXd singular_values;  // n_components, non-increasing
    Eigen::Index sample_count = 0;
    // Sum of squared singular values over all directions (total centered
    // variance times sample_count - 1).
    double total_energy = 0.0;
    // The requested component count exceeded min(samples - 1, dim).
    bool clamped = false;
};

namespace detail {

// Gram-Schmidt (two passes) of row r against rows [0, r); returns the norm
// left before normalisation.
inline double orthonormalize_row(RowMatrix& m, Eigen::Index r) {
    for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index q = 0; q < r; ++q) m.row(r) -= m.row(q).dot(m.row(r)) * m.row(q);
    const double n = m.row(r).norm();
    if (n > 0.0) m.row(r) /= n;
    return n;
}

// Replace row r by a unit vector orthogonal to rows [0, r), trying the
// standard basis in order.
inline void complete_row(RowMatrix& m, Eigen::Index r) {
    for (Eigen::Index e = 0; e < m.cols(); ++e) {
        m.row(r).setZero();
        m(r, e) = 1.0;
        if (orthonormalize_row(m, r) > 0.5) return;
    }
    throw Error(ErrorKind::degenerate_input, "cannot complete orthonormal basis");
}

inline void fix_sign(Eigen::Ref<Eigen::RowVectorXd> row) {
    Eigen::Index arg = 0;
    row.cwiseAbs().maxCoeff(&arg);
    if (row(arg) < 0.0) row = -row;
}

}  // namespace detail

// Principal components of the rows of `data` (samples x dim).
// Mean-centred; components are right singular vectors of the centred matrix
// in decreasing singular-value order, each flipped so that its
// largest-magnitude entry is positive. The eigenproblem is solved on the
// samples x samples Gram matrix when dim exceeds the sample count and on the
// dim x dim scatter matrix otherwise. Directions with (numerically) zero
// energy are completed deterministically so the rows stay orthonormal.
inline PcaBasis fit_pca_basis(const Eigen::Ref<const RowMatrix>& data, Eigen::Index n_components) {
    const Eigen::Index samples = data.rows();
    const Eigen::Index dim = data.cols();
    require(samples >= 2, ErrorKind::invalid_argument, "PCA needs at least 2 samples");
    require(n_components >= 1, ErrorKind::invalid_argument, "n_components must be >= 1");

    PcaBasis out;
    out.sample_count = samples;
    const Eigen::Index bound = std::min(samples - 1, dim);
    if (n_components > bound) {
        n_components = bound;
        out.clamped = true;
    }

    out.mean = data.colwise().mean().transpose();
    const RowMatrix centered = data.rowwise() - out.mean.transpose();
    out.total_energy = centered.squaredNorm();

    Eigen::VectorXd eigvals;
    RowMatrix comps(n_components, dim);

    if (dim > samples) {
        const Eigen::MatrixXd gram = centered * centered.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        eigvals = es.eigenvalues().reverse();
        const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
        for (Eigen::Index k = 0; k < n_components; ++k)
            comps.row(k) = u.col(k).transpose() * centered;
    } else {
        const Eigen::MatrixXd scatter = centered.transpose() * centered;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
        eigvals = es.eigenvalues().reverse();
        const Eigen::MatrixXd v = es.eigenvectors().rowwise().reverse();
        for (Eigen::Index k = 0; k < n_components; ++k) comps.row(k) = v.col(k).transpose();
    }

    const double top = std::max(eigvals.size() > 0 ? eigvals(0) : 0.0, 0.0);
    const double floor = 1e-13 * top;
    out.singular_values.resize(n_components);
    for (Eigen::Index k = 0; k < n_components; ++k) {
        const double lambda = eigvals(k);
        if (top <= 0.0 || lambda <= floor) {
            out.singular_values(k) = 0.0;
            detail::complete_row(comps, k);
        } else {
            out.singular_values(k) = std::sqrt(lambda);
            if (detail::orthonormalize_row(comps, k) <= 0.0) detail::complete_row(comps, k);
        }
        detail::fix_sign(comps.row(k));
    }
    out.components = std::move(comps);
    return out;
}

// Fraction of total centred energy not captured by the basis.
inline double residual_energy_fraction(const PcaBasis& basis) {
    if (basis.total_energy <= 0.0) return 0.0;
    const double captured = basis.singular_values.squaredNorm();
    return std::max(0.0, basis.total_energy - captured) / basis.total_energy;
}

}  // namespace bipar
