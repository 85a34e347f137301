#pragma once

// On-disk synthetic family: family.json manifest (config and ground truth),
// template, landmarks, skeleton, and per-sample body/eyeball OBJs and PNG
// textures.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "bipar/io.hpp"
#include "bipar/png_io.hpp"
#include "bipar/synth.hpp"

namespace bipar {

inline constexpr const char* kEyeSides[2] = {"L", "R"};

inline std::string sample_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%03d", i);
    return buf;
}

inline json family_manifest(const FamilyConfig& config, const FamilyTemplate& t,
                            const std::vector<FamilySample>& samples) {
    json list = json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string name = sample_name(static_cast<int>(i));
        json eyes = json::array(), sockets = json::array(), eye_files = json::array();
        for (std::size_t e = 0; e < 2; ++e) {
            eyes.push_back(to_json(s.eyes[e]));
            sockets.push_back(to_json(s.sockets[e]));
            eye_files.push_back("samples/" + name + "_eye_" + kEyeSides[e] + ".obj");
        }
        list.push_back({{"name", name},
                        {"mesh", "samples/" + name + ".obj"},
                        {"texture", "samples/" + name + ".png"},
                        {"eye_meshes", eye_files},
                        {"z", vector_to_json(s.z)},
                        {"joints", points_to_json(s.joints)},
                        {"sockets", sockets},
                        {"eyeballs", eyes},
                        {"texture_coeffs", vector_to_json(s.texture_coeffs)}});
    }
    json factors = json::array();
    for (int f = 0; f < config.factor_count; ++f) factors.push_back(kFamilyFactorNames[static_cast<std::size_t>(f)]);
    const TopologySignature sig = topology_signature(t.mesh);
    return {{"format", "bipar-family"},
            {"version", 1},
            {"config", to_json(config)},
            {"factor_names", factors},
            {"vertex_count", sig.vertex_count},
            {"face_count", sig.face_count},
            {"edge_count", sig.edge_count},
            {"joint_names", t.skeleton.joint_names},
            {"template", "template.obj"},
            {"landmarks", "landmarks.json"},
            {"skeleton", "skeleton.json"},
            {"samples", list}};
}

inline void write_family(const FamilyConfig& config, const std::filesystem::path& dir) {
    const FamilyTemplate t = generate_template(config);
    const auto samples = sample_family(config, t, config.sample_count);
    std::filesystem::create_directories(dir / "samples");
    save_mesh(t.mesh, dir / "template.obj");
    write_json(dir / "landmarks.json", to_json(t.landmarks));
    write_json(dir / "skeleton.json", to_json(t.skeleton));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string name = sample_name(static_cast<int>(i));
        save_mesh(s.mesh, dir / "samples" / (name + ".obj"));
        save_png(family_texture(config, s.texture_coeffs), dir / "samples" / (name + ".png"));
        for (std::size_t e = 0; e < 2; ++e)
            save_mesh(eyeball_mesh(s.eyes[e]), dir / "samples" / (name + "_eye_" + kEyeSides[e] + ".obj"));
    }
    write_json(dir / "family.json", family_manifest(config, t, samples));
}

struct FamilyData {
    json manifest;
    LandmarkSet landmarks;
    Skeleton skeleton;
    std::vector<Mesh> meshes;
    std::vector<TextureImage> textures;
    std::vector<std::array<Mesh, 2>> eyes;
};

inline FamilyData load_family(const std::filesystem::path& dir) {
    FamilyData d;
    d.manifest = read_json(dir / "family.json");
    const std::string ctx = "family.json";
    d.landmarks = landmarks_from_json(read_json(dir / detail::field<std::string>(d.manifest, "landmarks", ctx)));
    d.skeleton = skeleton_from_json(read_json(dir / detail::field<std::string>(d.manifest, "skeleton", ctx)));
    const json samples = detail::field<json>(d.manifest, "samples", ctx);
    require(samples.is_array() && samples.size() >= 2, ErrorKind::invalid_argument,
            "family.json must list at least 2 samples");
    for (const auto& s : samples) {
        d.meshes.push_back(load_mesh(dir / detail::field<std::string>(s, "mesh", "family sample")));
        d.textures.push_back(load_png(dir / detail::field<std::string>(s, "texture", "family sample")));
        const auto eye_files = detail::field<std::vector<std::string>>(s, "eye_meshes", "family sample");
        require(eye_files.size() == 2, ErrorKind::parse, "family sample needs two eye meshes");
        d.eyes.push_back({load_mesh(dir / eye_files[0]), load_mesh(dir / eye_files[1])});
    }
    return d;
}

// Socket landmark patch names, e.g. "eye_socket_L".
inline std::string socket_patch(std::size_t side) { return std::string("eye_socket_") + kEyeSides[side]; }

// Per-eye ratios measured from a body mesh (socket circles fitted to the
// landmark patches) and its eyeball meshes.
inline std::vector<EyeRatioSample> measure_eye_ratios(const Mesh& body, const LandmarkSet& lm,
                                                      const std::array<Mesh, 2>& eyes) {
    std::vector<EyeRatioSample> out;
    for (std::size_t e = 0; e < 2; ++e) {
        const SocketCircle sc = fit_socket_circle(body, lm.patch(socket_patch(e)));
        const auto [center, radius] = measure_eye_sphere(eyes[e]);
        out.push_back({radius, (sc.center - center).dot(sc.normal), sc.radius});
    }
    return out;
}

}  // namespace bipar
