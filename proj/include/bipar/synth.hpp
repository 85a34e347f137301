#pragma once

// Procedural biped family with known ground truth. Every sample is
// template + A z for a fixed displacement matrix A and latent factors z, so
// linear-model recovery is exact by construction.
//
// The body is a set of straight tubes (rings of `ring_segments` vertices)
// laid out in T-pose. Every joint sits on a tube station; its landmark
// patches are the two rings at +-patch_offset along the tube axis, so the
// union bounding box is centred on the joint for every z.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "bipar/eyeball.hpp"
#include "bipar/mesh.hpp"
#include "bipar/pose.hpp"
#include "bipar/rig.hpp"
#include "bipar/rng.hpp"
#include "bipar/texture.hpp"

namespace bipar {

inline const std::array<const char*, 7> kFamilyFactorNames = {
    "arm_length", "leg_length", "torso_girth", "head_scale", "ear_length", "belly_offset",
    "tail_length"};

struct FamilyConfig {
    std::uint64_t seed = 7;
    // Vertices per ring; a multiple of 4 keeps ring bounding boxes symmetric.
    int ring_segments = 12;
    // Interior rings between consecutive tube stations.
    int rings_per_segment = 3;
    int factor_count = 7;
    // One [lo, hi] range per active factor; empty means [-1, 1] for all.
    std::vector<std::pair<double, double>> factor_ranges;
    double c1 = 0.9;
    double c2 = 0.35;
    int sample_count = 50;
    // Half-width of the linear weight blend around each joint (0 = rigid).
    double weight_falloff = 0.0;
    int texture_size = 256;
    int texture_factor_count = 3;

    std::pair<double, double> range(int f) const {
        if (factor_ranges.empty()) return {-1.0, 1.0};
        return factor_ranges[static_cast<std::size_t>(f)];
    }
};

inline void validate(const FamilyConfig& c) {
    require(c.factor_count >= 1 && c.factor_count <= static_cast<int>(kFamilyFactorNames.size()),
            ErrorKind::invalid_argument, "factor_count must be in [1, 7]");
    require(c.factor_ranges.empty() ||
                static_cast<int>(c.factor_ranges.size()) == c.factor_count,
            ErrorKind::invalid_argument, "factor_ranges must have factor_count entries");
    for (const auto& [lo, hi] : c.factor_ranges)
        require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi && lo >= -1.5 && hi <= 1.5,
                ErrorKind::invalid_argument, "factor ranges must be finite within [-1.5, 1.5]");
    require(c.ring_segments >= 4 && c.ring_segments % 4 == 0, ErrorKind::invalid_argument,
            "ring_segments must be a positive multiple of 4");
    require(c.rings_per_segment >= 0, ErrorKind::invalid_argument,
            "rings_per_segment must be >= 0");
    require(c.c1 > 0.0 && c.c2 >= 0.0, ErrorKind::invalid_argument, "need c1 > 0, c2 >= 0");
    require(c.sample_count >= 1, ErrorKind::invalid_argument, "sample_count must be >= 1");
    require(c.weight_falloff >= 0.0 && c.weight_falloff <= 0.035, ErrorKind::invalid_argument,
            "weight_falloff must be in [0, 0.035]");
    require(c.texture_size >= 1, ErrorKind::invalid_argument, "texture_size must be >= 1");
    require(c.texture_factor_count >= 1 && c.texture_factor_count <= 3,
            ErrorKind::invalid_argument, "texture_factor_count must be in [1, 3]");
}

struct FamilyTemplate {
    Mesh mesh;
    LandmarkSet landmarks;
    // Default skeleton with generator joints (z = 0) and weights.
    Skeleton skeleton;
    // 3N x f vertex displacement per unit factor.
    RowMatrix displacement;
    // 3K x f joint displacement per unit factor.
    RowMatrix joint_displacement;
    // Joint owning each vertex rigidly, -1 inside a blend band.
    std::vector<int> rigid_owner;
    std::array<SocketCircle, 2> sockets;  // L, R at z = 0
};

struct FamilySample {
    Mesh mesh;
    Eigen::VectorXd z;
    JointPoints joints;
    std::array<SocketCircle, 2> sockets;
    std::array<EyeballFit, 2> eyes;
    Eigen::VectorXd texture_coeffs;
};

namespace detail {

inline constexpr double kPatchOffset = 0.015;

struct Station {
    Eigen::Vector3d pos;
    double radius;
    int joint;  // -1 for plain stations
};

struct Tube {
    Eigen::Vector3d axis, e1, e2;
    std::vector<Station> stations;
    int entry_owner;
    bool belly = false;
};

struct BodyGeometry {
    std::vector<double> verts;
    std::vector<int> faces;
    std::vector<double> uvs;
    std::vector<std::vector<std::pair<int, double>>> weights;
    LandmarkSet landmarks;
    JointPoints joints;
    std::array<SocketCircle, 2> sockets;
};

class BodyBuilder {
public:
    BodyBuilder(const FamilyConfig& cfg, const Skeleton& sk) : cfg_(cfg), sk_(sk) {}

    BodyGeometry build(const Eigen::VectorXd& z7) {
        out_ = {};
        out_.joints.resize(sk_.joint_count(), 3);
        const double arm = z7(0), leg = z7(1), girth = z7(2), head = z7(3), ear = z7(4);
        const double belly = z7(5), tail = z7(6);
        belly_ = belly;
        const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(),
                              ez = Eigen::Vector3d::UnitZ();

        const Eigen::Vector3d pelvis(0.0, 0.95, 0.0);
        const double head_r = 0.13 + 0.03 * head;
        const double torso_r = 0.14 + 0.03 * girth;
        const auto up = [&](double dy) { return Eigen::Vector3d(pelvis + dy * ey); };
        const Eigen::Vector3d head_base = up(0.58);

        chart_ = 0;

        // column: pelvis .. head
        Tube column{ey, ex, ez, {}, J("pelvis"), true};
        column.stations = {
            {up(-0.10), 0.8 * torso_r, -1},
            {pelvis, torso_r, J("pelvis")},
            {up(0.12), torso_r, J("spine1")},
            {up(0.24), 1.05 * torso_r, J("spine2")},
            {up(0.36), torso_r, J("chest")},
            {up(0.50), 0.055, J("neck")},
            {head_base, 0.07, J("head")},
            {Eigen::Vector3d(head_base + head_r * ey), head_r, -1},
            {Eigen::Vector3d(head_base + 2.0 * head_r * ey), 0.35 * head_r, -1},
        };
        belly_lo_ = pelvis.y();
        belly_hi_ = up(0.36).y();
        add_tube(column);

        const double arm_y = pelvis.y() + 0.43;
        const double upper = 0.24 + 0.05 * arm, fore = 0.21 + 0.04 * arm;
        const double thigh = 0.36 + 0.07 * leg, shin = 0.34 + 0.06 * leg;
        const double tail_len = 0.25 + 0.10 * tail;
        const double ear_len = 0.10 + 0.05 * ear;

        for (int side = 0; side < 2; ++side) {
            const double s = side == 0 ? 1.0 : -1.0;
            const std::string tag = side == 0 ? "_L" : "_R";
            const auto at_x = [&](double x) { return Eigen::Vector3d(s * x, arm_y, 0.0); };
            Tube armt{s * ex, ey, ez, {}, J("chest")};
            armt.stations = {
                {at_x(0.0), 0.05, -1},
                {at_x(0.07), 0.05, J("clavicle" + tag)},
                {at_x(0.17), 0.048, J("shoulder" + tag)},
                {at_x(0.17 + upper), 0.04, J("elbow" + tag)},
                {at_x(0.17 + upper + fore), 0.032, J("wrist" + tag)},
                {at_x(0.26 + upper + fore), 0.02, -1},
            };
            add_tube(armt);
        }
        for (int side = 0; side < 2; ++side) {
            const double s = side == 0 ? 1.0 : -1.0;
            const std::string tag = side == 0 ? "_L" : "_R";
            const double hip_y = pelvis.y() - 0.07;
            const auto at_y = [&](double y) { return Eigen::Vector3d(s * 0.09, y, 0.0); };
            Tube legt{-ey, ex, ez, {}, J("pelvis")};
            const double knee_y = hip_y - thigh, ankle_y = knee_y - shin;
            legt.stations = {
                {at_y(hip_y + 0.05), 0.07, -1},
                {at_y(hip_y), 0.07, J("hip" + tag)},
                {at_y(knee_y), 0.055, J("knee" + tag)},
                {at_y(ankle_y), 0.04, J("ankle" + tag)},
                {at_y(ankle_y - 0.04), 0.035, -1},
            };
            add_tube(legt);

            const double foot_y = ankle_y - 0.025;
            const auto at_z = [&](double zz) { return Eigen::Vector3d(s * 0.09, foot_y, zz); };
            Tube foot{ez, ex, ey, {}, J("ankle" + tag)};
            foot.stations = {
                {at_z(-0.05), 0.035, -1},
                {at_z(0.09), 0.03, J("toe" + tag)},
                {at_z(0.15), 0.02, -1},
            };
            add_tube(foot);
        }
        {
            const double ty = pelvis.y() - 0.04;
            const auto at_z = [&](double zz) { return Eigen::Vector3d(0.0, ty, zz); };
            Tube tailt{-ez, ex, ey, {}, J("pelvis")};
            tailt.stations = {
                {at_z(0.0), 0.04, -1},
                {at_z(-0.13), 0.035, J("tail_root")},
                {at_z(-0.13 - tail_len), 0.01, -1},
            };
            add_tube(tailt);
        }
        for (int side = 0; side < 2; ++side) {
            const double s = side == 0 ? 1.0 : -1.0;
            const Eigen::Vector3d base(s * 0.45 * head_r, head_base.y() + 1.75 * head_r, 0.0);
            Tube eart{ey, ex, ez, {}, J("head")};
            eart.stations = {
                {base, 0.03, -1},
                {Eigen::Vector3d(base + 0.5 * ear_len * ey), 0.035, -1},
                {Eigen::Vector3d(base + ear_len * ey), 0.005, -1},
            };
            add_tube(eart);
        }
        for (int side = 0; side < 2; ++side) {
            const double s = side == 0 ? 1.0 : -1.0;
            SocketCircle sc;
            sc.center = Eigen::Vector3d(s * 0.4 * head_r, head_base.y() + 1.15 * head_r,
                                        0.92 * head_r);
            sc.radius = 0.25 * head_r;
            sc.normal = ez;
            out_.sockets[static_cast<std::size_t>(side)] = sc;
            add_socket(sc, side == 0 ? "eye_socket_L" : "eye_socket_R");
        }
        return std::move(out_);
    }

private:
    int J(const std::string& name) const { return sk_.index_of(name); }

    struct Ring {
        Eigen::Vector3d center;
        double radius;
        int owner;
        int patch_joint;
        char patch_side;
        double axial;  // signed position along the tube axis
    };

    int add_vertex(const Eigen::Vector3d& p, double u, double v) {
        const int idx = static_cast<int>(out_.verts.size() / 3);
        out_.verts.insert(out_.verts.end(), {p.x(), p.y(), p.z()});
        out_.uvs.insert(out_.uvs.end(), {u, v});
        return idx;
    }

    std::pair<double, double> chart_uv(double fu, double fv) const {
        const int cols = 4, rows = 3;
        const double w = 1.0 / cols, h = 1.0 / rows, margin = 0.01;
        const int cx = chart_ % cols, cy = chart_ / cols;
        return {cx * w + margin + fu * (w - 2 * margin), cy * h + margin + fv * (h - 2 * margin)};
    }

    void add_tube(const Tube& t) {
        const double d = kPatchOffset;
        const int r_in = cfg_.rings_per_segment;
        std::vector<Ring> rings;
        int owner = t.entry_owner;
        const auto axial = [&](const Eigen::Vector3d& p) { return p.dot(t.axis); };
        const auto n_st = t.stations.size();
        for (std::size_t i = 0; i < n_st; ++i) {
            const Station& st = t.stations[i];
            Eigen::Vector3d seg_start = st.pos;
            if (st.joint >= 0) {
                const Eigen::Vector3d a = st.pos - d * t.axis, b = st.pos + d * t.axis;
                rings.push_back({a, st.radius, owner, st.joint, 'a', axial(a)});
                owner = st.joint;
                rings.push_back({b, st.radius, owner, st.joint, 'b', axial(b)});
                seg_start = b;
                out_.joints.row(st.joint) = st.pos.transpose();
            } else {
                rings.push_back({st.pos, st.radius, owner, -1, 0, axial(st.pos)});
            }
            if (i + 1 < n_st) {
                const Station& nx = t.stations[i + 1];
                const Eigen::Vector3d seg_end = nx.joint >= 0 ? nx.pos - d * t.axis : nx.pos;
                for (int k = 1; k <= r_in; ++k) {
                    const double f = static_cast<double>(k) / (r_in + 1);
                    const Eigen::Vector3d c = (1.0 - f) * seg_start + f * seg_end;
                    const double r = (1.0 - f) * st.radius + f * nx.radius;
                    rings.push_back({c, r, owner, -1, 0, axial(c)});
                }
            }
        }

        // joint blend bands: (axial position, parent owner, joint)
        struct Band {
            double axial;
            int before, after;
        };
        std::vector<Band> bands;
        {
            int o = t.entry_owner;
            for (const auto& st : t.stations) {
                if (st.joint < 0) continue;
                bands.push_back({axial(st.pos), o, st.joint});
                o = st.joint;
            }
        }

        const int m = cfg_.ring_segments;
        const auto n_rings = static_cast<int>(rings.size());
        std::vector<int> first(rings.size());
        for (int ri = 0; ri < n_rings; ++ri) {
            const Ring& rg = rings[static_cast<std::size_t>(ri)];
            std::vector<std::pair<int, double>> w = weights_for(rg, bands);
            double bump = 0.0;
            if (t.belly && rg.patch_joint < 0) {
                const double y = rg.center.y();
                if (y > belly_lo_ && y < belly_hi_)
                    bump = std::sin(std::numbers::pi * (y - belly_lo_) / (belly_hi_ - belly_lo_));
            }
            std::vector<int> idx;
            std::vector<int> patch;
            for (int s = 0; s < m; ++s) {
                const double a = 2.0 * std::numbers::pi * s / m;
                const double ca = std::cos(a), sa = std::sin(a);
                Eigen::Vector3d p = rg.center + rg.radius * (ca * t.e1 + sa * t.e2);
                // belly pushes the front (+e2 = +z on the column) forward
                if (bump > 0.0 && sa > 0.0) p += 0.04 * belly_ * bump * sa * t.e2;
                const auto [u, v] = chart_uv(static_cast<double>(s) / m,
                                             n_rings > 1 ? static_cast<double>(ri) / (n_rings - 1)
                                                         : 0.0);
                const int vi = add_vertex(p, u, v);
                out_.weights.push_back(w);
                if (s == 0) first[static_cast<std::size_t>(ri)] = vi;
                if (rg.patch_joint >= 0) patch.push_back(vi);
            }
            if (rg.patch_joint >= 0) {
                const std::string name = sk_.joint_names[static_cast<std::size_t>(rg.patch_joint)] +
                                         "_" + std::string(1, rg.patch_side);
                out_.landmarks.patches[name] = patch;
            }
        }
        for (int ri = 0; ri + 1 < n_rings; ++ri) {
            const int a0 = first[static_cast<std::size_t>(ri)];
            const int b0 = first[static_cast<std::size_t>(ri + 1)];
            for (int s = 0; s < m; ++s) {
                const int s1 = (s + 1) % m;
                out_.faces.insert(out_.faces.end(), {a0 + s, b0 + s, b0 + s1});
                out_.faces.insert(out_.faces.end(), {a0 + s, b0 + s1, a0 + s1});
            }
        }
        // flat caps
        for (int end = 0; end < 2; ++end) {
            const auto ri = static_cast<std::size_t>(end == 0 ? 0 : n_rings - 1);
            const Ring& rg = rings[ri];
            const auto [u, v] = chart_uv(0.5, end == 0 ? 0.0 : 1.0);
            const int pole = add_vertex(rg.center, u, v);
            out_.weights.push_back(weights_for(rg, bands));
            const int f0 = first[ri];
            for (int s = 0; s < m; ++s) {
                const int s1 = (s + 1) % m;
                if (end == 0)
                    out_.faces.insert(out_.faces.end(), {pole, f0 + s1, f0 + s});
                else
                    out_.faces.insert(out_.faces.end(), {pole, f0 + s, f0 + s1});
            }
        }
        ++chart_;
    }

    template <class Bands>
    std::vector<std::pair<int, double>> weights_for(const Ring& rg, const Bands& bands) const {
        const double b = cfg_.weight_falloff;
        if (b > 0.0) {
            for (const auto& band : bands) {
                const double s = rg.axial - band.axial;
                if (std::abs(s) < b) {
                    const double t = (s + b) / (2.0 * b);
                    return {{band.before, 1.0 - t}, {band.after, t}};
                }
            }
        }
        return {{rg.owner, 1.0}};
    }

    void add_socket(const SocketCircle& sc, const std::string& name) {
        const int m = cfg_.ring_segments;
        const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX(), e2 = Eigen::Vector3d::UnitY();
        const int head = J("head");
        std::array<int, 2> first{};
        std::vector<int> inner;
        for (int ring = 0; ring < 2; ++ring) {
            const double r = ring == 0 ? sc.radius : 1.4 * sc.radius;
            for (int s = 0; s < m; ++s) {
                const double a = 2.0 * std::numbers::pi * s / m;
                const Eigen::Vector3d p = sc.center + r * (std::cos(a) * e1 + std::sin(a) * e2);
                const double rr = ring == 0 ? 0.3 : 0.45;
                const auto [u, v] = chart_uv(0.5 + rr * std::cos(a), 0.5 + rr * std::sin(a));
                const int vi = add_vertex(p, u, v);
                out_.weights.push_back({{head, 1.0}});
                if (s == 0) first[static_cast<std::size_t>(ring)] = vi;
                if (ring == 0) inner.push_back(vi);
            }
        }
        for (int s = 0; s < m; ++s) {
            const int s1 = (s + 1) % m;
            const int a0 = first[0], b0 = first[1];
            out_.faces.insert(out_.faces.end(), {a0 + s, b0 + s, b0 + s1});
            out_.faces.insert(out_.faces.end(), {a0 + s, b0 + s1, a0 + s1});
        }
        out_.landmarks.patches[name] = inner;
        ++chart_;
    }

    const FamilyConfig& cfg_;
    const Skeleton& sk_;
    BodyGeometry out_;
    int chart_ = 0;
    double belly_ = 0.0;
    double belly_lo_ = 0.0, belly_hi_ = 0.0;
};

inline Eigen::VectorXd full_factors(const FamilyConfig& cfg, const Eigen::VectorXd& z) {
    Eigen::VectorXd z7 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kFamilyFactorNames.size()));
    z7.head(cfg.factor_count) = z;
    return z7;
}

inline Points to_points(const std::vector<double>& v) {
    return Eigen::Map<const Points>(v.data(), static_cast<Eigen::Index>(v.size() / 3), 3);
}

}  // namespace detail

inline FamilyTemplate generate_template(const FamilyConfig& config) {
    validate(config);
    Skeleton sk = default_skeleton();
    detail::BodyBuilder builder(config, sk);
    const Eigen::Index f = config.factor_count;
    detail::BodyGeometry base = builder.build(detail::full_factors(config, Eigen::VectorXd::Zero(f)));

    FamilyTemplate t;
    Points verts = detail::to_points(base.verts);
    Faces faces = Eigen::Map<const Faces>(base.faces.data(),
                                          static_cast<Eigen::Index>(base.faces.size() / 3), 3);
    UVs uvs = Eigen::Map<const UVs>(base.uvs.data(), static_cast<Eigen::Index>(base.uvs.size() / 2), 2);
    t.mesh = make_mesh(std::move(verts), std::move(faces), std::move(uvs));
    t.landmarks = std::move(base.landmarks);
    t.sockets = base.sockets;

    const Eigen::Index n = t.mesh.vertices.rows();
    sk.rest_joints = base.joints;
    sk.weights = WeightMatrix::Zero(n, sk.joint_count());
    t.rigid_owner.assign(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& w = base.weights[static_cast<std::size_t>(i)];
        for (const auto& [k, wk] : w) sk.weights(i, k) += wk;
        if (w.size() == 1) t.rigid_owner[static_cast<std::size_t>(i)] = w.front().first;
    }
    t.displacement.resize(3 * n, f);
    t.joint_displacement.resize(3 * sk.joint_count(), f);
    const Eigen::Map<const Eigen::VectorXd> v0(base.verts.data(), 3 * n);
    const Eigen::Map<const Eigen::VectorXd> j0(base.joints.data(), base.joints.size());
    for (Eigen::Index j = 0; j < f; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(f);
        e(j) = 1.0;
        detail::BodyGeometry g = builder.build(detail::full_factors(config, e));
        t.displacement.col(j) = Eigen::Map<const Eigen::VectorXd>(g.verts.data(), 3 * n) - v0;
        t.joint_displacement.col(j) =
            Eigen::Map<const Eigen::VectorXd>(g.joints.data(), g.joints.size()) - j0;
    }
    t.skeleton = std::move(sk);
    return t;
}

// Socket circles and eyeballs for latent factors z (analytic, not fitted).
inline std::array<SocketCircle, 2> family_sockets(const FamilyConfig& config,
                                                  const Eigen::VectorXd& z) {
    const double head = z.size() > 3 && config.factor_count > 3 ? z(3) : 0.0;
    const double head_r = 0.13 + 0.03 * head;
    const double head_y = 0.95 + 0.58 + 1.15 * head_r;
    std::array<SocketCircle, 2> out;
    for (int side = 0; side < 2; ++side) {
        const double s = side == 0 ? 1.0 : -1.0;
        out[static_cast<std::size_t>(side)].center =
            Eigen::Vector3d(s * 0.4 * head_r, head_y, 0.92 * head_r);
        out[static_cast<std::size_t>(side)].radius = 0.25 * head_r;
        out[static_cast<std::size_t>(side)].normal = Eigen::Vector3d::UnitZ();
    }
    return out;
}

// Base color plus texture_factor_count fixed patterns, all functions of the
// texel center uv.
inline TextureImage family_texture(const FamilyConfig& config, const Eigen::VectorXd& coeffs) {
    const int w = config.texture_size, h = config.texture_size;
    TextureImage img{w, h, Eigen::VectorXd(static_cast<Eigen::Index>(w) * h * 3)};
    const double two_pi = 2.0 * std::numbers::pi;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) / w, v = (y + 0.5) / h;
            Eigen::Vector3d c(0.5 + 0.1 * std::sin(two_pi * u), 0.5, 0.5 + 0.1 * std::cos(two_pi * v));
            const Eigen::Vector3d patterns[3] = {
                Eigen::Vector3d(0.1 * std::sin(two_pi * 8 * u), 0.05 * std::sin(two_pi * 8 * u), 0.0),
                Eigen::Vector3d(0.0, 0.1, 0.1) * std::cos(two_pi * 6 * u) * std::cos(two_pi * 6 * v),
                Eigen::Vector3d::Constant(0.1 * (2.0 * v - 1.0)),
            };
            for (Eigen::Index k = 0; k < coeffs.size(); ++k) c += coeffs(k) * patterns[k];
            img.pixels.segment<3>(3 * (static_cast<Eigen::Index>(y) * w + x)) = c;
        }
    }
    return img;
}

inline FamilySample make_sample(const FamilyConfig& config, const FamilyTemplate& t,
                                const Eigen::VectorXd& z, const Eigen::VectorXd& tex_coeffs) {
    require(z.size() == config.factor_count, ErrorKind::dimension_mismatch,
            "latent vector length differs from factor_count");
    FamilySample s;
    s.z = z;
    s.mesh = t.mesh;
    Eigen::Map<Eigen::VectorXd>(s.mesh.vertices.data(), s.mesh.vertices.size()) +=
        t.displacement * z;
    s.joints = t.skeleton.rest_joints;
    Eigen::Map<Eigen::VectorXd>(s.joints.data(), s.joints.size()) += t.joint_displacement * z;
    s.sockets = family_sockets(config, z);
    for (std::size_t e = 0; e < 2; ++e)
        s.eyes[e] = reconstruct_eyeball(s.sockets[e], config.c1, config.c2);
    s.texture_coeffs = tex_coeffs;
    return s;
}

// Latent factors uniform in the configured ranges; sample i draws from the
// stream seeded with seed ^ i.
inline std::vector<FamilySample> sample_family(const FamilyConfig& config, const FamilyTemplate& t,
                                               int count) {
    require(count >= 1, ErrorKind::invalid_argument, "count must be >= 1");
    std::vector<FamilySample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Xorshift64Star rng(derived_seed(config.seed, static_cast<std::uint64_t>(i)));
        Eigen::VectorXd z(config.factor_count);
        for (int f = 0; f < config.factor_count; ++f) {
            const auto [lo, hi] = config.range(f);
            z(f) = rng.uniform(lo, hi);
        }
        Eigen::VectorXd tc(config.texture_factor_count);
        for (int k = 0; k < config.texture_factor_count; ++k) tc(k) = rng.uniform(-1.0, 1.0);
        out.push_back(make_sample(config, t, z, tc));
    }
    return out;
}

inline std::vector<FamilySample> sample_family(const FamilyConfig& config, int count) {
    return sample_family(config, generate_template(config), count);
}

struct PosedScene {
    Mesh mesh;
    JointPoints joints;
};

// Reference posing with no code shared with the skinning module: rotations
// from Eigen::AngleAxis, joint transforms as explicit 4x4 products along the
// ancestor chain, rest transforms inverted with a general 4x4 inverse, and
// one 4x4 product per vertex and joint.
inline PosedScene ground_truth_pose_scene(const Mesh& rest_mesh, const JointPoints& joints,
                                          const Skeleton& sk, const PoseParams& pose) {
    const int k_count = sk.joint_count();
    require(pose.size() == 3 * k_count, ErrorKind::dimension_mismatch, "pose length mismatch");
    const auto chain_product = [&](int k, bool posed) {
        std::vector<int> chain;
        for (int j = k; j >= 0; j = sk.parents[static_cast<std::size_t>(j)]) chain.push_back(j);
        Eigen::Matrix4d g = Eigen::Matrix4d::Identity();
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            const int j = *it;
            const int p = sk.parents[static_cast<std::size_t>(j)];
            Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
            const Eigen::Vector3d w = pose.segment<3>(3 * j);
            if (posed && w.norm() > 0.0)
                local.topLeftCorner<3, 3>() = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
            Eigen::Vector3d off = joints.row(j).transpose();
            if (p >= 0) off -= joints.row(p).transpose();
            local.topRightCorner<3, 1>() = off;
            g = g * local;
        }
        return g;
    };
    std::vector<Eigen::Matrix4d> rel(static_cast<std::size_t>(k_count));
    PosedScene scene;
    scene.joints.resize(k_count, 3);
    for (int k = 0; k < k_count; ++k) {
        rel[static_cast<std::size_t>(k)] = chain_product(k, true) * chain_product(k, false).inverse();
        Eigen::Vector4d jh(joints(k, 0), joints(k, 1), joints(k, 2), 1.0);
        scene.joints.row(k) = (rel[static_cast<std::size_t>(k)] * jh).head<3>().transpose();
    }
    scene.mesh = rest_mesh;
    for (Eigen::Index i = 0; i < rest_mesh.vertices.rows(); ++i) {
        const Eigen::Vector4d vh(rest_mesh.vertices(i, 0), rest_mesh.vertices(i, 1),
                                 rest_mesh.vertices(i, 2), 1.0);
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        for (int k = 0; k < k_count; ++k) {
            const double w = sk.weights(i, k);
            if (w != 0.0) acc += w * (rel[static_cast<std::size_t>(k)] * vh);
        }
        scene.mesh.vertices.row(i) = acc.head<3>().transpose();
    }
    return scene;
}

inline PosedScene ground_truth_pose_scene(const FamilyTemplate& t, const PoseParams& pose) {
    return ground_truth_pose_scene(t.mesh, t.skeleton.rest_joints, t.skeleton, pose);
}

inline PosedScene ground_truth_pose_scene(const FamilyTemplate& t, const FamilySample& s,
                                          const PoseParams& pose) {
    return ground_truth_pose_scene(s.mesh, s.joints, t.skeleton, pose);
}

inline PosedScene ground_truth_pose_scene(const FamilyConfig& config, const PoseParams& pose) {
    return ground_truth_pose_scene(generate_template(config), pose);
}

}  // namespace bipar
