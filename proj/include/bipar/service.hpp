#pragma once

// HTTP service over an immutable bundle:
//   GET  /meta
//   POST /eval   (JSON, or the little-endian binary layout with ?format=binary)
//   POST /fit    (bounded by a worker semaphore)

#include <bit>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>

#include "bipar/bundle.hpp"
#include "bipar/fitter.hpp"
#include "bipar/png_io.hpp"

// after Eigen: <resolv.h> defines _res, which Eigen uses as an identifier
#include <httplib.h>

namespace bipar {

struct ServiceOptions {
    int fit_workers = 2;
};

inline json meta_json(const ModelBundle& b) {
    const Mesh& mean = b.character.shape.mean;
    return {{"shape_dim", b.character.shape.n_components()},
            {"pose_dim", 3 * b.character.skeleton.joint_count()},
            {"tex_dim", b.texture.n_components()},
            {"joint_names", b.character.skeleton.joint_names},
            {"sigma_shape", vector_to_json(b.character.shape.sigma())},
            {"sigma_tex", vector_to_json(b.texture.sigma())},
            {"vertex_count", mean.vertices.rows()},
            {"face_count", mean.faces.rows()},
            {"texture_width", b.texture.width},
            {"texture_height", b.texture.height}};
}

// Missing vectors default to zero; present ones must have the model length.
inline Eigen::VectorXd param_or_zero(const json& body, const char* key, Eigen::Index n) {
    if (!body.contains(key) || body[key].is_null()) return Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = vector_from_json(body[key], key);
    require(v.size() == n, ErrorKind::dimension_mismatch,
            std::string(key) + " expected=" + std::to_string(n) + " got=" + std::to_string(v.size()));
    return v;
}

inline Evaluation evaluate_request(const ModelBundle& b, const json& body) {
    require(body.is_object(), ErrorKind::parse, "request body must be a JSON object");
    return evaluate(b, param_or_zero(body, "beta", b.character.shape.n_components()),
                    param_or_zero(body, "theta", 3 * b.character.skeleton.joint_count()),
                    param_or_zero(body, "tex", b.texture.n_components()));
}

inline json eval_json(const Evaluation& e) {
    const Mesh& m = e.posed.posed;
    const auto rgb = to_rgb8(e.texture);
    return {{"vertices", std::vector<double>(m.vertices.data(), m.vertices.data() + m.vertices.size())},
            {"faces", std::vector<int>(m.faces.data(), m.faces.data() + m.faces.size())},
            {"uvs", std::vector<double>(m.uvs.data(), m.uvs.data() + m.uvs.size())},
            {"joints", std::vector<double>(e.posed.joints.data(), e.posed.joints.data() + e.posed.joints.size())},
            {"texture",
             {{"w", e.texture.width},
              {"h", e.texture.height},
              {"rgb8_base64", httplib::detail::base64_encode(std::string(rgb.begin(), rgb.end()))}}}};
}

// Binary layout (all little-endian):
//   "BPR1", u32 vertex_count, u32 face_count, u32 width, u32 height,
//   f64 vertices[3V], u32 faces[3F], f64 uvs[2V], u8 rgb[3WH]
inline std::string eval_binary(const Evaluation& e) {
    const Mesh& m = e.posed.posed;
    std::string out = "BPR1";
    const auto put = [&out](std::uint64_t u, int bytes) {
        for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    };
    put(static_cast<std::uint64_t>(m.vertices.rows()), 4);
    put(static_cast<std::uint64_t>(m.faces.rows()), 4);
    put(static_cast<std::uint64_t>(e.texture.width), 4);
    put(static_cast<std::uint64_t>(e.texture.height), 4);
    for (Eigen::Index i = 0; i < m.vertices.size(); ++i) put(std::bit_cast<std::uint64_t>(m.vertices.data()[i]), 8);
    for (Eigen::Index i = 0; i < m.faces.size(); ++i) put(static_cast<std::uint32_t>(m.faces.data()[i]), 4);
    for (Eigen::Index i = 0; i < m.uvs.size(); ++i) put(std::bit_cast<std::uint64_t>(m.uvs.data()[i]), 8);
    const auto rgb = to_rgb8(e.texture);
    out.append(rgb.begin(), rgb.end());
    return out;
}

// Body: {target_joints?, target_vertices?, config?, init?: {beta, theta}}.
inline FitResult fit_request(const ModelBundle& b, const json& body) {
    require(body.is_object(), ErrorKind::parse, "request body must be a JSON object");
    const Character& c = b.character;
    const FitSettings s = fit_settings_from_json(body.value("config", json()));
    FitProblem p{c, std::nullopt, std::nullopt, std::nullopt, s.lambda_s, s.lambda_p};
    if (body.contains("target_vertices")) p.target_vertices = points_from_json(body["target_vertices"], "target_vertices");
    if (body.contains("target_joints")) p.target_joints = points_from_json(body["target_joints"], "target_joints");
    require(p.target_vertices || p.target_joints, ErrorKind::invalid_argument,
            "need target_joints or target_vertices");
    FitParams init{ShapeParams::Zero(c.shape.n_components()), PoseParams::Zero(3 * c.skeleton.joint_count())};
    if (body.contains("init")) {
        init.beta = param_or_zero(body["init"], "beta", init.beta.size());
        init.theta = param_or_zero(body["init"], "theta", init.theta.size());
    }
    return fit(p, init, s.config);
}

inline json error_json(const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    return {{"error", err ? to_string(err->kind()) : "internal"}, {"message", e.what()}};
}

inline int error_status(const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    if (!err) return 500;
    return err->kind() == ErrorKind::diverged ? 422 : 400;
}

class Service {
public:
    Service(std::shared_ptr<const ModelBundle> bundle, ServiceOptions opts = {})
        : bundle_(std::move(bundle)), fit_slots_(opts.fit_workers) {
        require(opts.fit_workers >= 1 && opts.fit_workers <= kMaxWorkers, ErrorKind::invalid_argument,
                "fit_workers must be in [1, 64]");
        meta_ = meta_json(*bundle_).dump();
    }

    void register_routes(httplib::Server& server) {
        server.Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(meta_, "application/json");
        });
        server.Post("/eval", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const Evaluation e = evaluate_request(*bundle_, parse_json(req.body, "request body"));
                if (req.get_param_value("format") == "binary")
                    res.set_content(eval_binary(e), "application/octet-stream");
                else
                    res.set_content(eval_json(e).dump(), "application/json");
            });
        });
        server.Post("/fit", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json body = parse_json(req.body, "request body");
                fit_slots_.acquire();
                struct Release {
                    std::counting_semaphore<kMaxWorkers>& s;
                    ~Release() { s.release(); }
                } release{fit_slots_};
                res.set_content(to_json(fit_request(*bundle_, body)).dump(), "application/json");
            });
        });
    }

private:
    static constexpr int kMaxWorkers = 64;

    template <typename F>
    static void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            res.status = error_status(e);
            res.set_content(error_json(e).dump(), "application/json");
        }
    }

    std::shared_ptr<const ModelBundle> bundle_;
    std::counting_semaphore<kMaxWorkers> fit_slots_;
    std::string meta_;
};

}  // namespace bipar
