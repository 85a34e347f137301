#pragma once

// JSON documents and binary blobs for landmarks, skeletons, pose sequences,
// retarget maps, fit configuration/results and the PCA models.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bipar/eyeball.hpp"
#include "bipar/fitter.hpp"
#include "bipar/obj.hpp"
#include "bipar/pose.hpp"
#include "bipar/rig.hpp"
#include "bipar/shape_space.hpp"
#include "bipar/synth.hpp"
#include "bipar/texture.hpp"

namespace bipar {

using json = nlohmann::json;

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse, what + ": " + e.what());
    }
}

inline json read_json(const std::filesystem::path& path) {
    return parse_json(read_text(path), path.string());
}

inline void write_json(const std::filesystem::path& path, const json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

namespace detail {

// Typed field access that reports the document path instead of throwing a
// library-specific exception.
template <typename T>
T field(const json& j, const char* key, const std::string& ctx) {
    require(j.is_object() && j.contains(key), ErrorKind::parse, ctx + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, ctx + ": bad field '" + key + "': " + e.what());
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return field<T>(j, key, ctx);
}

}  // namespace detail

inline json vector_to_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const json& j, const std::string& ctx) {
    require(j.is_array(), ErrorKind::parse, ctx + ": expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].is_number(), ErrorKind::parse, ctx + ": element " + std::to_string(i) + " is not a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline json points_to_json(const Points& p) {
    json out = json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1), p(i, 2)});
    return out;
}

// Accepts [[x,y,z], ...] or a flat [x,y,z,x,y,z,...] array.
inline Points points_from_json(const json& j, const std::string& ctx) {
    require(j.is_array(), ErrorKind::parse, ctx + ": expected an array");
    if (!j.empty() && j.front().is_array()) {
        Points p(static_cast<Eigen::Index>(j.size()), 3);
        for (std::size_t i = 0; i < j.size(); ++i) {
            require(j[i].is_array() && j[i].size() == 3, ErrorKind::parse,
                    ctx + ": point " + std::to_string(i) + " must have 3 coordinates");
            for (std::size_t c = 0; c < 3; ++c)
                p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
        }
        return p;
    }
    const Eigen::VectorXd flat_values = vector_from_json(j, ctx);
    require(flat_values.size() % 3 == 0, ErrorKind::parse, ctx + ": flat array length not a multiple of 3");
    return unflat(flat_values);
}

inline json vec3_to_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

inline Eigen::Vector3d vec3_from_json(const json& j, const std::string& ctx) {
    const Eigen::VectorXd v = vector_from_json(j, ctx);
    require(v.size() == 3, ErrorKind::parse, ctx + ": expected 3 numbers");
    return v;
}

// landmarks

inline json to_json(const LandmarkSet& lm) {
    json patches = json::object();
    for (const auto& [name, idx] : lm.patches) patches[name] = idx;
    return {{"patches", patches}};
}

inline LandmarkSet landmarks_from_json(const json& j) {
    const json patches = detail::field<json>(j, "patches", "landmarks");
    require(patches.is_object(), ErrorKind::parse, "landmarks: 'patches' must be an object");
    LandmarkSet lm;
    for (const auto& [name, idx] : patches.items())
        lm.patches[name] = detail::field<std::vector<int>>(patches, name.c_str(), "landmarks");
    return lm;
}

// skeleton

inline json to_json(const Skeleton& sk) {
    json joints = json::array();
    for (int k = 0; k < sk.joint_count(); ++k) {
        const auto ku = static_cast<std::size_t>(k);
        json jt = {{"name", sk.joint_names[ku]},
                   {"parent", sk.parents[ku]},
                   {"patch_a", sk.joint_patches[ku].first},
                   {"patch_b", sk.joint_patches[ku].second}};
        if (sk.rest_joints.rows() == sk.joint_count()) jt["rest"] = vec3_to_json(sk.rest_joints.row(k));
        joints.push_back(std::move(jt));
    }
    json doc = {{"joints", joints}};
    if (sk.weights.size() > 0) {
        doc["weights"] = {{"encoding", "dense-row-major"},
                          {"rows", sk.weights.rows()},
                          {"cols", sk.weights.cols()},
                          {"data", std::vector<double>(sk.weights.data(),
                                                       sk.weights.data() + sk.weights.size())}};
    }
    return doc;
}

// Weight rows are renormalized on load.
inline Skeleton skeleton_from_json(const json& j) {
    Skeleton sk;
    const json joints = detail::field<json>(j, "joints", "skeleton");
    require(joints.is_array() && !joints.empty(), ErrorKind::parse, "skeleton: 'joints' must be a non-empty array");
    bool all_rest = true;
    for (const auto& jt : joints) {
        sk.joint_names.push_back(detail::field<std::string>(jt, "name", "skeleton joint"));
        sk.parents.push_back(detail::field<int>(jt, "parent", "skeleton joint"));
        sk.joint_patches.emplace_back(detail::field<std::string>(jt, "patch_a", "skeleton joint"),
                                      detail::field<std::string>(jt, "patch_b", "skeleton joint"));
        all_rest = all_rest && jt.contains("rest");
    }
    const auto k = static_cast<Eigen::Index>(joints.size());
    if (all_rest) {
        sk.rest_joints.resize(k, 3);
        for (Eigen::Index i = 0; i < k; ++i)
            sk.rest_joints.row(i) = vec3_from_json(joints[static_cast<std::size_t>(i)]["rest"], "skeleton rest").transpose();
    }
    if (j.contains("weights")) {
        const json& w = j["weights"];
        const auto enc = detail::field<std::string>(w, "encoding", "skeleton weights");
        require(enc == "dense-row-major", ErrorKind::parse, "skeleton weights: unsupported encoding '" + enc + "'");
        const Eigen::VectorXd data = vector_from_json(detail::field<json>(w, "data", "skeleton weights"), "skeleton weights");
        require(data.size() % k == 0, ErrorKind::dimension_mismatch,
                "skeleton weights: data length is not a multiple of the joint count");
        const Eigen::Index rows = data.size() / k;
        if (w.contains("rows"))
            require(w["rows"].get<Eigen::Index>() == rows, ErrorKind::dimension_mismatch,
                    "skeleton weights: row count disagrees with data length");
        sk.weights = Eigen::Map<const WeightMatrix>(data.data(), rows, k);
        normalize_weights(sk.weights);
    }
    validate(sk);
    return sk;
}

// pose sequences

struct PoseSequence {
    double fps = 30.0;
    std::vector<PoseParams> frames;
};

inline json to_json(const PoseSequence& s) {
    json frames = json::array();
    for (const auto& f : s.frames) frames.push_back(vector_to_json(f));
    return {{"fps", s.fps}, {"frames", frames}};
}

inline PoseSequence pose_sequence_from_json(const json& j) {
    PoseSequence s;
    s.fps = detail::field<double>(j, "fps", "pose sequence");
    const json frames = detail::field<json>(j, "frames", "pose sequence");
    require(frames.is_array(), ErrorKind::parse, "pose sequence: 'frames' must be an array");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        s.frames.push_back(vector_from_json(frames[i], "pose sequence frame " + std::to_string(i)));
        require(s.frames.back().size() % 3 == 0, ErrorKind::dimension_mismatch,
                "pose sequence frame " + std::to_string(i) + " length is not a multiple of 3");
    }
    return s;
}

// retarget maps; the source joint list defaults to the default skeleton

inline json to_json(const RetargetMap& m) {
    json pairs = json::array();
    for (const auto& p : m.pairs)
        pairs.push_back({{"src", p.src}, {"dst", p.dst}, {"conjugate_axis_angle", vec3_to_json(p.conjugate)}});
    return {{"src_joints", m.src_joints}, {"pairs", pairs}};
}

inline RetargetMap retarget_map_from_json(const json& j) {
    RetargetMap m;
    m.src_joints = detail::field_or<std::vector<std::string>>(j, "src_joints", default_skeleton().joint_names,
                                                              "retarget map");
    const json pairs = detail::field<json>(j, "pairs", "retarget map");
    require(pairs.is_array(), ErrorKind::parse, "retarget map: 'pairs' must be an array");
    for (const auto& p : pairs) {
        RetargetPair rp;
        rp.src = detail::field<std::string>(p, "src", "retarget pair");
        rp.dst = detail::field<std::string>(p, "dst", "retarget pair");
        if (p.contains("conjugate_axis_angle"))
            rp.conjugate = vec3_from_json(p["conjugate_axis_angle"], "retarget pair conjugate_axis_angle");
        m.pairs.push_back(std::move(rp));
    }
    return m;
}

// fit configuration and result

struct FitSettings {
    FitConfig config;
    double lambda_s = 1.0;
    double lambda_p = 1.0;
};

inline FitSettings fit_settings_from_json(const json& j) {
    FitSettings s;
    if (j.is_null()) return s;
    require(j.is_object(), ErrorKind::parse, "fit config must be an object");
    s.config.max_iters = detail::field_or<int>(j, "max_iters", s.config.max_iters, "fit config");
    s.config.grad_tol = detail::field_or<double>(j, "grad_tol", s.config.grad_tol, "fit config");
    s.config.step_init = detail::field_or<double>(j, "step_init", s.config.step_init, "fit config");
    s.config.seed = detail::field_or<std::uint64_t>(j, "seed", s.config.seed, "fit config");
    s.lambda_s = detail::field_or<double>(j, "lambda_s", s.lambda_s, "fit config");
    s.lambda_p = detail::field_or<double>(j, "lambda_p", s.lambda_p, "fit config");
    const auto method = detail::field_or<std::string>(j, "method", "lm", "fit config");
    if (method == "lm")
        s.config.method = FitMethod::levenberg_marquardt;
    else if (method == "gd")
        s.config.method = FitMethod::gradient_descent;
    else
        throw Error(ErrorKind::invalid_argument, "fit config: method must be 'lm' or 'gd'");
    require(s.config.max_iters >= 0 && s.config.grad_tol >= 0.0 && s.config.step_init > 0.0,
            ErrorKind::invalid_argument, "fit config: need max_iters >= 0, grad_tol >= 0, step_init > 0");
    return s;
}

inline json to_json(const FitResult& r) {
    return {{"beta", vector_to_json(r.params.beta)},
            {"theta", vector_to_json(r.params.theta)},
            {"l_para", r.loss.para},
            {"l_shape", r.loss.shape},
            {"l_pose", r.loss.pose},
            {"smoothed_total", r.loss.smoothed_total},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"gradient_norm", r.gradient_norm}};
}

// family configuration

inline json to_json(const FamilyConfig& c) {
    json ranges = json::array();
    for (const auto& [lo, hi] : c.factor_ranges) ranges.push_back({lo, hi});
    return {{"seed", c.seed},
            {"ring_segments", c.ring_segments},
            {"rings_per_segment", c.rings_per_segment},
            {"factor_count", c.factor_count},
            {"factor_ranges", ranges},
            {"c1", c.c1},
            {"c2", c.c2},
            {"sample_count", c.sample_count},
            {"weight_falloff", c.weight_falloff},
            {"texture_size", c.texture_size},
            {"texture_factor_count", c.texture_factor_count}};
}

inline FamilyConfig family_config_from_json(const json& j) {
    FamilyConfig c;
    if (j.is_null()) return c;
    require(j.is_object(), ErrorKind::parse, "family config must be an object");
    const std::string ctx = "family config";
    c.seed = detail::field_or<std::uint64_t>(j, "seed", c.seed, ctx);
    c.ring_segments = detail::field_or<int>(j, "ring_segments", c.ring_segments, ctx);
    c.rings_per_segment = detail::field_or<int>(j, "rings_per_segment", c.rings_per_segment, ctx);
    c.factor_count = detail::field_or<int>(j, "factor_count", c.factor_count, ctx);
    c.factor_ranges = detail::field_or<std::vector<std::pair<double, double>>>(j, "factor_ranges", {}, ctx);
    c.c1 = detail::field_or<double>(j, "c1", c.c1, ctx);
    c.c2 = detail::field_or<double>(j, "c2", c.c2, ctx);
    c.sample_count = detail::field_or<int>(j, "sample_count", c.sample_count, ctx);
    c.weight_falloff = detail::field_or<double>(j, "weight_falloff", c.weight_falloff, ctx);
    c.texture_size = detail::field_or<int>(j, "texture_size", c.texture_size, ctx);
    c.texture_factor_count = detail::field_or<int>(j, "texture_factor_count", c.texture_factor_count, ctx);
    validate(c);
    return c;
}

inline json to_json(const SocketCircle& s) {
    return {{"center", vec3_to_json(s.center)}, {"radius", s.radius}, {"normal", vec3_to_json(s.normal)}};
}

inline json to_json(const EyeballFit& e) {
    return {{"socket_center", vec3_to_json(e.socket_center)},
            {"socket_radius", e.socket_radius},
            {"socket_normal", vec3_to_json(e.socket_normal)},
            {"eye_center", vec3_to_json(e.eye_center)},
            {"eye_radius", e.eye_radius},
            {"depth", e.depth}};
}

// little-endian float64 blobs

inline void write_f64(const std::filesystem::path& path, const double* data, std::size_t count) {
    std::string bytes(count * 8, '\0');
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(data[i]);
        for (int b = 0; b < 8; ++b) bytes[8 * i + static_cast<std::size_t>(b)] = static_cast<char>((u >> (8 * b)) & 0xff);
    }
    write_text(path, bytes);
}

inline std::vector<double> read_f64(const std::filesystem::path& path) {
    const std::string bytes = read_text(path);
    require(bytes.size() % 8 == 0, ErrorKind::parse, path.string() + ": size is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b)
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + static_cast<std::size_t>(b)])) << (8 * b);
        out[i] = std::bit_cast<double>(u);
    }
    return out;
}

// Shape model directory: mean.obj, components.bin, header.json.
inline void save_shape_model(const ShapeModel& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_mesh(m.mean, dir / "mean.obj");
    write_f64(dir / "components.bin", m.components.data(), static_cast<std::size_t>(m.components.size()));
    write_json(dir / "header.json", {{"n_components", m.n_components()},
                                     {"N", m.vertex_count()},
                                     {"singular_values", vector_to_json(m.singular_values)},
                                     {"training_count", m.training_count},
                                     {"clamped", m.clamped}});
}

inline ShapeModel load_shape_model(const std::filesystem::path& dir) {
    const json h = read_json(dir / "header.json");
    ShapeModel m;
    m.mean = load_mesh(dir / "mean.obj");
    const auto k = detail::field<Eigen::Index>(h, "n_components", "shape header");
    const auto n = detail::field<Eigen::Index>(h, "N", "shape header");
    require(n == m.mean.vertices.rows(), ErrorKind::dimension_mismatch,
            "shape header N disagrees with mean.obj vertex count");
    const auto data = read_f64(dir / "components.bin");
    require(static_cast<Eigen::Index>(data.size()) == k * 3 * n, ErrorKind::dimension_mismatch,
            "components.bin holds " + std::to_string(data.size()) + " values, header implies " +
                std::to_string(k * 3 * n));
    m.components = Eigen::Map<const RowMatrix>(data.data(), k, 3 * n);
    m.singular_values = vector_from_json(detail::field<json>(h, "singular_values", "shape header"), "singular_values");
    require(m.singular_values.size() == k, ErrorKind::dimension_mismatch, "singular_values length differs from n_components");
    m.training_count = detail::field_or<Eigen::Index>(h, "training_count", 0, "shape header");
    m.clamped = detail::field_or<bool>(h, "clamped", false, "shape header");
    return m;
}

// Texture model directory: mean.bin, components.bin, header.json.
inline void save_texture_model(const TextureModel& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_f64(dir / "mean.bin", m.mean.data(), static_cast<std::size_t>(m.mean.size()));
    write_f64(dir / "components.bin", m.components.data(), static_cast<std::size_t>(m.components.size()));
    write_json(dir / "header.json", {{"n_components", m.n_components()},
                                     {"width", m.width},
                                     {"height", m.height},
                                     {"singular_values", vector_to_json(m.singular_values)},
                                     {"training_count", m.training_count},
                                     {"clamped", m.clamped}});
}

inline TextureModel load_texture_model(const std::filesystem::path& dir) {
    const json h = read_json(dir / "header.json");
    TextureModel m;
    m.width = detail::field<int>(h, "width", "texture header");
    m.height = detail::field<int>(h, "height", "texture header");
    const auto k = detail::field<Eigen::Index>(h, "n_components", "texture header");
    const Eigen::Index dim = static_cast<Eigen::Index>(m.width) * m.height * 3;
    const auto mean = read_f64(dir / "mean.bin");
    require(static_cast<Eigen::Index>(mean.size()) == dim, ErrorKind::dimension_mismatch,
            "texture mean.bin size disagrees with header dimensions");
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
    const auto data = read_f64(dir / "components.bin");
    require(static_cast<Eigen::Index>(data.size()) == k * dim, ErrorKind::dimension_mismatch,
            "texture components.bin size disagrees with header dimensions");
    m.components = Eigen::Map<const RowMatrix>(data.data(), k, dim);
    m.singular_values = vector_from_json(detail::field<json>(h, "singular_values", "texture header"), "singular_values");
    require(m.singular_values.size() == k, ErrorKind::dimension_mismatch, "singular_values length differs from n_components");
    m.training_count = detail::field_or<Eigen::Index>(h, "training_count", 0, "texture header");
    m.clamped = detail::field_or<bool>(h, "clamped", false, "texture header");
    return m;
}

}  // namespace bipar
