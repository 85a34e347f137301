#pragma once

// Recovery of shape and pose parameters from geometric targets.
//
// Objective (all terms optional):
//   E = huber(beta - beta_gt) + huber(theta - theta_gt)
//     + lambda_s / 2 |posed_vertices - target_vertices|^2
//     + lambda_p / 2 |posed_joints - target_joints|^2
// with huber(x) = x^2 / (2 delta) for |x| <= delta, |x| - delta / 2 otherwise.
// Reported terms are the raw L1 distance and the unsquared Euclidean norms.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bipar/character.hpp"
#include "bipar/metrics.hpp"

namespace bipar {

inline constexpr double kHuberDelta = 1e-4;

struct FitParams {
    ShapeParams beta;
    PoseParams theta;
};

struct FitProblem {
    const Character& character;
    std::optional<JointPoints> target_vertices;
    std::optional<JointPoints> target_joints;
    std::optional<FitParams> ground_truth;
    double lambda_s = 1.0;
    double lambda_p = 1.0;
    bool optimize_shape = true;
    bool optimize_pose = true;
};

enum class FitMethod { levenberg_marquardt, gradient_descent };

struct FitConfig {
    int max_iters = 200;
    double grad_tol = 1e-8;
    double step_init = 1.0;
    FitMethod method = FitMethod::levenberg_marquardt;
    std::uint64_t seed = 0;
};

struct LossTerms {
    double para = 0.0;   // L1, 0 without ground truth
    double shape = 0.0;  // |posed_vertices - target|, 0 without target
    double pose = 0.0;   // |posed_joints - target|, 0 without target
    double smoothed_total = 0.0;
};

struct FitResult {
    FitParams params;
    LossTerms loss;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
};

class FitDiverged : public Error {
public:
    FitDiverged(FitResult last_good, const std::string& what)
        : Error(ErrorKind::diverged, what), last_good_(std::move(last_good)) {}
    const FitResult& last_good() const { return last_good_; }

private:
    FitResult last_good_;
};

inline void validate(const FitProblem& p) {
    validate(p.character);
    require(p.target_vertices || p.target_joints || p.ground_truth, ErrorKind::invalid_argument,
            "fit problem needs at least one target");
    require(p.lambda_s >= 0.0 && p.lambda_p >= 0.0, ErrorKind::invalid_argument,
            "loss weights must be non-negative");
    if (p.target_vertices)
        require(p.target_vertices->rows() == p.character.shape.vertex_count(),
                ErrorKind::dimension_mismatch, "target vertex count mismatch");
    if (p.target_joints)
        require(p.target_joints->rows() == p.character.skeleton.joint_count(),
                ErrorKind::dimension_mismatch, "target joint count mismatch");
    if (p.ground_truth) {
        require(p.ground_truth->beta.size() == p.character.shape.n_components(),
                ErrorKind::dimension_mismatch, "ground-truth beta length mismatch");
        require(p.ground_truth->theta.size() == 3 * p.character.skeleton.joint_count(),
                ErrorKind::dimension_mismatch, "ground-truth theta length mismatch");
    }
}

// L1 distance between parameter sets.
inline double loss_para(const FitParams& pred, const FitParams& gt) {
    require(pred.beta.size() == gt.beta.size() && pred.theta.size() == gt.theta.size(),
            ErrorKind::dimension_mismatch, "parameter dimensions differ");
    return (pred.beta - gt.beta).lpNorm<1>() + (pred.theta - gt.theta).lpNorm<1>();
}

// Vertex distance of the two shapes posed with the ground-truth pose.
inline double loss_shape(const ShapeParams& beta_pred, const ShapeParams& beta_gt,
                         const PoseParams& theta_gt, const Character& c) {
    const auto a = pose_character(c, beta_pred, theta_gt);
    const auto b = pose_character(c, beta_gt, theta_gt);
    return (a.posed.vertices - b.posed.vertices).norm();
}

// Joint distance of the two poses applied to the ground-truth shape.
inline double loss_pose(const PoseParams& theta_pred, const PoseParams& theta_gt,
                        const ShapeParams& beta_gt, const Character& c) {
    const auto a = pose_character(c, beta_gt, theta_pred);
    const auto b = pose_character(c, beta_gt, theta_gt);
    return (a.joints - b.joints).norm();
}

namespace detail {

inline double huber(double x) {
    const double a = std::abs(x);
    return a <= kHuberDelta ? 0.5 * x * x / kHuberDelta : a - 0.5 * kHuberDelta;
}
inline double huber_grad(double x) {
    return std::abs(x) <= kHuberDelta ? x / kHuberDelta : (x > 0.0 ? 1.0 : -1.0);
}
inline double huber_curv(double x) { return std::abs(x) <= kHuberDelta ? 1.0 / kHuberDelta : 0.0; }

// d(rest joint)/d(beta), 3K x n_beta. Each coordinate is the midpoint of the
// patch bounding box; a tied extreme contributes the mean of the largest and
// smallest derivative in its tie set (the central difference at the kink).
inline Eigen::MatrixXd rest_joint_jacobian(const Character& c, const Mesh& shaped) {
    const auto& sk = c.skeleton;
    const auto nb = c.shape.n_components();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * sk.joint_count(), nb);
    std::vector<int> idx;
    for (int k = 0; k < sk.joint_count(); ++k) {
        const auto& [pa, pb] = sk.joint_patches[static_cast<std::size_t>(k)];
        idx = c.landmarks.patch(pa);
        const auto& b = c.landmarks.patch(pb);
        idx.insert(idx.end(), b.begin(), b.end());
        for (int axis = 0; axis < 3; ++axis) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int i : idx) {
                lo = std::min(lo, shaped.vertices(i, axis));
                hi = std::max(hi, shaped.vertices(i, axis));
            }
            const double tol_hi = 1e-12 * std::max(1.0, std::abs(hi));
            const double tol_lo = 1e-12 * std::max(1.0, std::abs(lo));
            for (Eigen::Index bcol = 0; bcol < nb; ++bcol) {
                double hmax = -std::numeric_limits<double>::infinity(), hmin = -hmax;
                double lmax = hmax, lmin = hmin;
                for (int i : idx) {
                    const double d = c.shape.components(bcol, 3 * i + axis);
                    const double x = shaped.vertices(i, axis);
                    if (x >= hi - tol_hi) {
                        hmax = std::max(hmax, d);
                        hmin = std::min(hmin, d);
                    }
                    if (x <= lo + tol_lo) {
                        lmax = std::max(lmax, d);
                        lmin = std::min(lmin, d);
                    }
                }
                jac(3 * k + axis, bcol) = 0.25 * (hmax + hmin + lmax + lmin);
            }
        }
    }
    return jac;
}

}  // namespace detail

// Residual vector (sqrt(lambda)-scaled vertex and joint differences) and its
// Jacobian with respect to [beta, theta].
struct Linearization {
    PosedCharacter state;
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;  // rows: residual, cols: n_beta + 3K
};

inline Linearization linearize(const FitProblem& p, const FitParams& at, bool with_jacobian) {
    const Character& c = p.character;
    const auto& sk0 = c.skeleton;
    const int kc = sk0.joint_count();
    const auto nb = c.shape.n_components();
    const Eigen::Index n = c.shape.vertex_count();

    Linearization lin;
    lin.state = pose_character(c, at.beta, at.theta);
    const auto& st = lin.state;
    const Eigen::Index rv = p.target_vertices ? 3 * n : 0;
    const Eigen::Index rj = p.target_joints ? 3 * kc : 0;
    lin.residual.resize(rv + rj);
    const double ws = std::sqrt(p.lambda_s), wp = std::sqrt(p.lambda_p);
    if (rv) lin.residual.head(rv) = ws * flat(st.posed.vertices - *p.target_vertices);
    if (rj) lin.residual.tail(rj) = wp * flat(st.joints - *p.target_joints);
    if (!with_jacobian) return lin;

    const Eigen::Index cols = nb + 3 * kc;
    lin.jacobian = Eigen::MatrixXd::Zero(rv + rj, cols);
    const auto& sk = st.skeleton;

    std::vector<Eigen::Matrix3d> rot(static_cast<std::size_t>(kc));
    std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(kc));
    std::vector<Eigen::Matrix3d> lever(static_cast<std::size_t>(kc));  // R_parent * J_left
    for (int k = 0; k < kc; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        rot[ku] = st.transforms.global[ku].linear();
        pos[ku] = st.joints.row(k).transpose();
        const int par = sk.parents[ku];
        const Eigen::Matrix3d rp =
            par < 0 ? Eigen::Matrix3d::Identity() : rot[static_cast<std::size_t>(par)];
        lever[ku] = rp * left_jacobian(joint_angle(at.theta, k));
    }

    // shape part: rest joints move with beta, posed joints follow the chain
    const Eigen::MatrixXd djrest = detail::rest_joint_jacobian(c, st.shaped);
    std::vector<Eigen::MatrixXd> dpos(static_cast<std::size_t>(kc));
    std::vector<Eigen::MatrixXd> vert_const(static_cast<std::size_t>(kc));
    for (int k = 0; k < kc; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const int par = sk.parents[ku];
        const Eigen::MatrixXd dj = djrest.middleRows(3 * k, 3);
        if (par < 0) {
            dpos[ku] = dj;
        } else {
            const auto pu = static_cast<std::size_t>(par);
            dpos[ku] = dpos[pu] + rot[pu] * (dj - djrest.middleRows(3 * par, 3));
        }
        vert_const[ku] = dpos[ku] - rot[ku] * dj;
    }

    if (rv) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Vector3d v = st.shaped.vertices.row(i).transpose();
            Eigen::Matrix3d blend_rot = Eigen::Matrix3d::Zero();
            Eigen::MatrixXd shape_rows = Eigen::MatrixXd::Zero(3, nb);
            std::vector<Eigen::Vector3d> arm(static_cast<std::size_t>(kc), Eigen::Vector3d::Zero());
            std::vector<bool> touched(static_cast<std::size_t>(kc), false);
            for (int k = 0; k < kc; ++k) {
                const double w = sk.weights(i, k);
                if (w == 0.0) continue;
                const auto ku = static_cast<std::size_t>(k);
                blend_rot += w * rot[ku];
                shape_rows += w * vert_const[ku];
                const Eigen::Vector3d x = st.transforms.rest_relative[ku] * v;
                for (int j = k; j >= 0; j = sk.parents[static_cast<std::size_t>(j)]) {
                    const auto ju = static_cast<std::size_t>(j);
                    arm[ju] += w * (x - pos[ju]);
                    touched[ju] = true;
                }
            }
            auto rows = lin.jacobian.middleRows(3 * i, 3);
            // components(:, 3i..3i+2)^T is the per-vertex shape basis
            rows.leftCols(nb) =
                ws * (blend_rot * c.shape.components.middleCols(3 * i, 3).transpose() + shape_rows);
            for (int j = 0; j < kc; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                if (!touched[ju]) continue;
                rows.middleCols(nb + 3 * j, 3) = -ws * skew(arm[ju]) * lever[ju];
            }
        }
    }
    if (rj) {
        for (int k = 0; k < kc; ++k) {
            auto rows = lin.jacobian.middleRows(rv + 3 * k, 3);
            rows.leftCols(nb) = wp * dpos[static_cast<std::size_t>(k)];
            for (int j = sk.parents[static_cast<std::size_t>(k)]; j >= 0;
                 j = sk.parents[static_cast<std::size_t>(j)]) {
                const auto ju = static_cast<std::size_t>(j);
                rows.middleCols(nb + 3 * j, 3) =
                    -wp * skew(pos[static_cast<std::size_t>(k)] - pos[ju]) * lever[ju];
            }
        }
    }
    return lin;
}

namespace detail {

inline Eigen::VectorXd stack(const FitParams& p) {
    Eigen::VectorXd x(p.beta.size() + p.theta.size());
    x << p.beta, p.theta;
    return x;
}

inline FitParams unstack(const Eigen::VectorXd& x, Eigen::Index nb) {
    return {x.head(nb), x.tail(x.size() - nb)};
}

inline LossTerms loss_terms(const FitProblem& p, const FitParams& at, const PosedCharacter& st) {
    LossTerms t;
    double smooth = 0.0;
    if (p.ground_truth) {
        t.para = loss_para(at, *p.ground_truth);
        const Eigen::VectorXd d = stack(at) - stack(*p.ground_truth);
        for (Eigen::Index i = 0; i < d.size(); ++i) smooth += huber(d(i));
    }
    if (p.target_vertices) {
        const double sq = (st.posed.vertices - *p.target_vertices).squaredNorm();
        t.shape = std::sqrt(sq);
        smooth += 0.5 * p.lambda_s * sq;
    }
    if (p.target_joints) {
        const double sq = (st.joints - *p.target_joints).squaredNorm();
        t.pose = std::sqrt(sq);
        smooth += 0.5 * p.lambda_p * sq;
    }
    t.smoothed_total = smooth;
    return t;
}

}  // namespace detail

// Smoothed objective value and reported loss terms.
inline LossTerms evaluate_loss(const FitProblem& p, const FitParams& at) {
    return detail::loss_terms(p, at, pose_character(p.character, at.beta, at.theta));
}

// Analytic gradient of the smoothed objective.
inline FitParams gradient(const FitProblem& p, const FitParams& at) {
    validate(p);
    const Linearization lin = linearize(p, at, true);
    Eigen::VectorXd g = lin.jacobian.transpose() * lin.residual;
    if (p.ground_truth) {
        const Eigen::VectorXd d = detail::stack(at) - detail::stack(*p.ground_truth);
        for (Eigen::Index i = 0; i < d.size(); ++i) g(i) += detail::huber_grad(d(i));
    }
    return detail::unstack(g, at.beta.size());
}

inline FitResult fit(const FitProblem& p, const FitParams& init, const FitConfig& cfg = {}) {
    validate(p);
    const Eigen::Index nb = p.character.shape.n_components();
    const Eigen::Index nt = 3 * p.character.skeleton.joint_count();
    require(init.beta.size() == nb && init.theta.size() == nt, ErrorKind::dimension_mismatch,
            "initial parameters have the wrong dimensions");

    // active parameter indices
    std::vector<Eigen::Index> active;
    if (p.optimize_shape)
        for (Eigen::Index i = 0; i < nb; ++i) active.push_back(i);
    if (p.optimize_pose)
        for (Eigen::Index i = 0; i < nt; ++i) active.push_back(nb + i);
    const auto na = static_cast<Eigen::Index>(active.size());

    Eigen::VectorXd x = detail::stack(init);
    const Eigen::VectorXd gt = p.ground_truth ? detail::stack(*p.ground_truth) : Eigen::VectorXd();

    const auto objective = [&](const Eigen::VectorXd& xv) {
        return evaluate_loss(p, detail::unstack(xv, nb));
    };

    FitResult res;
    res.params = init;
    res.loss = objective(x);
    if (!std::isfinite(res.loss.smoothed_total))
        throw FitDiverged(res, "objective is not finite at the initial parameters");

    double mu = -1.0;
    double step = cfg.step_init;
    for (int iter = 0;; ++iter) {
        const Linearization lin = linearize(p, detail::unstack(x, nb), true);
        Eigen::VectorXd g_full = lin.jacobian.transpose() * lin.residual;
        Eigen::VectorXd curv = Eigen::VectorXd::Zero(x.size());
        if (p.ground_truth) {
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                g_full(i) += detail::huber_grad(x(i) - gt(i));
                curv(i) = detail::huber_curv(x(i) - gt(i));
            }
        }
        Eigen::VectorXd g(na);
        for (Eigen::Index a = 0; a < na; ++a) g(a) = g_full(active[static_cast<std::size_t>(a)]);
        res.iterations = iter;
        res.gradient_norm = g.norm();
        if (res.gradient_norm <= cfg.grad_tol) {
            res.converged = true;
            break;
        }
        if (iter >= cfg.max_iters) break;

        const double e0 = res.loss.smoothed_total;
        bool accepted = false;
        Eigen::VectorXd x_new;
        LossTerms l_new;

        if (cfg.method == FitMethod::levenberg_marquardt) {
            Eigen::MatrixXd ja(lin.jacobian.rows(), na);
            for (Eigen::Index a = 0; a < na; ++a)
                ja.col(a) = lin.jacobian.col(active[static_cast<std::size_t>(a)]);
            Eigen::MatrixXd h = ja.transpose() * ja;
            for (Eigen::Index a = 0; a < na; ++a) h(a, a) += curv(active[static_cast<std::size_t>(a)]);
            const double dmax = std::max(h.diagonal().maxCoeff(), 1e-12);
            if (mu < 0.0) mu = 1e-2 * dmax;
            for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
                Eigen::MatrixXd hd = h;
                for (Eigen::Index a = 0; a < na; ++a) hd(a, a) += mu * (h(a, a) + 1e-9 * dmax);
                const Eigen::VectorXd delta = hd.ldlt().solve(-g);
                x_new = x;
                for (Eigen::Index a = 0; a < na; ++a) x_new(active[static_cast<std::size_t>(a)]) += delta(a);
                l_new = objective(x_new);
                if (std::isfinite(l_new.smoothed_total) && l_new.smoothed_total < e0) {
                    accepted = true;
                    mu = std::max(mu / 3.0, 1e-15 * dmax);
                } else {
                    mu *= 4.0;
                }
            }
        } else {
            // steepest descent with Armijo backtracking
            for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
                x_new = x;
                for (Eigen::Index a = 0; a < na; ++a)
                    x_new(active[static_cast<std::size_t>(a)]) -= step * g(a);
                l_new = objective(x_new);
                if (std::isfinite(l_new.smoothed_total) &&
                    l_new.smoothed_total <= e0 - 1e-4 * step * g.squaredNorm()) {
                    accepted = true;
                    step *= 2.0;
                } else {
                    step *= 0.5;
                }
            }
        }
        if (!accepted) {
            if (!std::isfinite(l_new.smoothed_total))
                throw FitDiverged(res, "objective became non-finite");
            break;  // no descent possible at machine precision
        }
        if (p.optimize_pose) {
            // same rotations with every angle in [0, pi]
            Eigen::VectorXd x_wrap = x_new;
            bool wrapped = false;
            for (Eigen::Index k = 0; k < nt; k += 3) {
                auto w = x_wrap.segment<3>(nb + k);
                const double n = w.norm();
                if (n > std::numbers::pi) {
                    w *= std::remainder(n, 2.0 * std::numbers::pi) / n;
                    wrapped = true;
                }
            }
            if (wrapped) {
                const LossTerms l_wrap = objective(x_wrap);
                if (l_wrap.smoothed_total <= l_new.smoothed_total) {
                    x_new = std::move(x_wrap);
                    l_new = l_wrap;
                }
            }
        }
        x = std::move(x_new);
        res.params = detail::unstack(x, nb);
        res.loss = l_new;
    }
    return res;
}

}  // namespace bipar
