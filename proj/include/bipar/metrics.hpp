#pragma once

#include <Eigen/Dense>

#include "bipar/error.hpp"
#include "bipar/rig.hpp"

namespace bipar {

struct Similarity {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    JointPoints apply(const JointPoints& p) const {
        JointPoints out = (scale * (p * rotation.transpose())).rowwise() + translation.transpose();
        return out;
    }
};

// Least-squares similarity taking `src` onto `dst` (rotation from the SVD of
// the cross-covariance with the reflection fixed, then optimal scale and
// translation).
inline Similarity procrustes(const JointPoints& src, const JointPoints& dst) {
    require(src.rows() == dst.rows() && src.rows() > 0, ErrorKind::dimension_mismatch,
            "procrustes needs equal, non-zero point counts");
    const double n = static_cast<double>(src.rows());
    const Eigen::RowVector3d mu_s = src.colwise().mean();
    const Eigen::RowVector3d mu_d = dst.colwise().mean();
    const JointPoints s = src.rowwise() - mu_s;
    const JointPoints d = dst.rowwise() - mu_d;
    const Eigen::Matrix3d cov = d.transpose() * s / n;
    const double var_s = s.squaredNorm() / n;

    Similarity t;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d sign(1.0, 1.0, 1.0);
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2) = -1.0;
    t.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
    t.scale = var_s > 0.0 ? svd.singularValues().dot(sign) / var_s : 0.0;
    t.translation = mu_d.transpose() - t.scale * t.rotation * mu_s.transpose();
    return t;
}

inline double mean_point_error(const JointPoints& a, const JointPoints& b) {
    require(a.rows() == b.rows(), ErrorKind::dimension_mismatch, "point counts differ");
    if (a.rows() == 0) return 0.0;
    return (a - b).rowwise().norm().mean();
}

struct ReconstructionMetrics {
    double mpve = 0.0;
    double mpjpe = 0.0;
    double pa_mpjpe = 0.0;
};

// Errors are in model units; the usual report multiplies metre-scale models
// by 1000.
inline ReconstructionMetrics eval_metrics(const JointPoints& pred_vertices,
                                          const JointPoints& gt_vertices,
                                          const JointPoints& pred_joints,
                                          const JointPoints& gt_joints) {
    ReconstructionMetrics m;
    m.mpve = mean_point_error(pred_vertices, gt_vertices);
    m.mpjpe = mean_point_error(pred_joints, gt_joints);
    if (pred_joints.rows() > 0)
        m.pa_mpjpe = mean_point_error(procrustes(pred_joints, gt_joints).apply(pred_joints), gt_joints);
    return m;
}

}  // namespace bipar
