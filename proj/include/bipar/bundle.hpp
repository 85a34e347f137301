#pragma once

// A fitted character model on disk:
//   manifest.json, shape/, texture/, skeleton.json, landmarks.json

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bipar/character.hpp"
#include "bipar/family_io.hpp"
#include "bipar/io.hpp"

namespace bipar {

struct ModelBundle {
    Character character;
    TextureModel texture;
    EyeConstants eyes;
    json manifest;
};

inline json bundle_manifest(const ModelBundle& b) {
    const Mesh& mean = b.character.shape.mean;
    const TopologySignature sig = topology_signature(mean);
    return {{"format", "bipar-bundle"},
            {"version", 1},
            {"vertex_count", sig.vertex_count},
            {"face_count", sig.face_count},
            {"edge_count", sig.edge_count},
            {"shape_dim", b.character.shape.n_components()},
            {"pose_dim", 3 * b.character.skeleton.joint_count()},
            {"tex_dim", b.texture.n_components()},
            {"joint_count", b.character.skeleton.joint_count()},
            {"texture_width", b.texture.width},
            {"texture_height", b.texture.height},
            {"shape_training_count", b.character.shape.training_count},
            {"shape_clamped", b.character.shape.clamped},
            {"tex_clamped", b.texture.clamped},
            {"c1", b.eyes.c1},
            {"c2", b.eyes.c2}};
}

inline void validate(const ModelBundle& b) {
    validate(b.character);
    require(b.texture.mean.size() == static_cast<Eigen::Index>(b.texture.width) * b.texture.height * 3,
            ErrorKind::dimension_mismatch, "texture mean size disagrees with its dimensions");
    require(b.eyes.c1 > 0.0 && b.eyes.c2 >= 0.0, ErrorKind::invalid_argument, "bundle eye constants invalid");
}

inline void save_bundle(const ModelBundle& b, const std::filesystem::path& dir) {
    validate(b);
    std::filesystem::create_directories(dir);
    save_shape_model(b.character.shape, dir / "shape");
    save_texture_model(b.texture, dir / "texture");
    Skeleton sk = b.character.skeleton;
    sk.rest_joints.resize(0, 3);
    write_json(dir / "skeleton.json", to_json(sk));
    write_json(dir / "landmarks.json", to_json(b.character.landmarks));
    write_json(dir / "manifest.json", bundle_manifest(b));
}

inline ModelBundle load_bundle(const std::filesystem::path& dir) {
    ModelBundle b;
    b.manifest = read_json(dir / "manifest.json");
    b.character.shape = load_shape_model(dir / "shape");
    b.character.skeleton = skeleton_from_json(read_json(dir / "skeleton.json"));
    b.character.landmarks = landmarks_from_json(read_json(dir / "landmarks.json"));
    b.texture = load_texture_model(dir / "texture");
    b.eyes.c1 = detail::field<double>(b.manifest, "c1", "manifest");
    b.eyes.c2 = detail::field<double>(b.manifest, "c2", "manifest");
    validate(b);
    const json expect = bundle_manifest(b);
    for (const char* key : {"vertex_count", "face_count", "shape_dim", "pose_dim", "tex_dim"})
        require(b.manifest.contains(key) && b.manifest[key] == expect[key], ErrorKind::dimension_mismatch,
                std::string("manifest ") + key + " expected=" + expect[key].dump() + " got=" +
                    (b.manifest.contains(key) ? b.manifest[key].dump() : "missing"));
    return b;
}

// Fits shape and texture PCA and the eye constants over a loaded family.
inline ModelBundle build_bundle(const FamilyData& family, Eigen::Index shape_k, Eigen::Index tex_k) {
    ModelBundle b;
    b.character.shape = fit_pca(family.meshes, shape_k);
    b.character.landmarks = family.landmarks;
    b.character.skeleton = family.skeleton;
    b.character.skeleton.rest_joints.resize(0, 3);
    b.texture = fit_texture_pca(family.textures, tex_k);
    std::vector<EyeRatioSample> ratios;
    for (std::size_t i = 0; i < family.meshes.size(); ++i) {
        const auto r = measure_eye_ratios(family.meshes[i], family.landmarks, family.eyes[i]);
        ratios.insert(ratios.end(), r.begin(), r.end());
    }
    b.eyes = estimate_eye_constants(ratios);
    b.manifest = bundle_manifest(b);
    return b;
}

struct Evaluation {
    PosedCharacter posed;
    TextureImage texture;
    std::optional<std::array<EyeballFit, 2>> eyes;  // when the rig has socket patches
};

// texture(pose(shape(beta), theta), tex); eyeballs seated on the posed sockets.
inline Evaluation evaluate(const ModelBundle& b, const ShapeParams& beta, const PoseParams& theta,
                           const Eigen::VectorXd& tex) {
    Evaluation e;
    e.posed = pose_character(b.character, beta, theta);
    e.texture = eval_texture(b.texture, tex);
    const auto& lm = b.character.landmarks.patches;
    const auto& names = b.character.skeleton.joint_names;
    const auto head = std::find(names.begin(), names.end(), "head");
    if (!lm.contains(socket_patch(0)) || !lm.contains(socket_patch(1)) || head == names.end()) return e;
    const auto hu = static_cast<std::size_t>(head - names.begin());
    const Eigen::Vector3d outward = e.posed.transforms.rest_relative[hu].linear() * Eigen::Vector3d::UnitZ();
    e.eyes.emplace();
    for (std::size_t s = 0; s < 2; ++s) {
        const auto& patch = b.character.landmarks.patch(socket_patch(s));
        (*e.eyes)[s] = reconstruct_eyeball(fit_socket_circle(e.posed.posed, patch, outward), b.eyes.c1, b.eyes.c2);
    }
    return e;
}

}  // namespace bipar
