// bipar command-line interface. Every option can also be set through an
// environment variable BIPAR_<OPTION> (e.g. BIPAR_BUNDLE, BIPAR_PORT).

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bipar/bundle.hpp"
#include "bipar/family_io.hpp"
#include "bipar/fitter.hpp"
#include "bipar/io.hpp"
#include "bipar/metrics.hpp"
#include "bipar/png_io.hpp"
#include "bipar/rng.hpp"
#include "bipar/service.hpp"

using namespace bipar;

namespace {

// A vector given as a bare array or as {key: [...]}; an empty path means zeros.
Eigen::VectorXd read_vector(const std::string& path, const char* key, Eigen::Index n) {
    if (path.empty()) return Eigen::VectorXd::Zero(n);
    json doc = read_json(path);
    if (doc.is_object()) doc = detail::field<json>(doc, key, path);
    Eigen::VectorXd v = vector_from_json(doc, path);
    require(v.size() == n, ErrorKind::dimension_mismatch,
            path + ": " + key + " expected=" + std::to_string(n) + " got=" + std::to_string(v.size()));
    return v;
}

void set_env_names(CLI::App& app) {
    for (CLI::Option* opt : app.get_options()) {
        if (opt->get_lnames().empty()) continue;
        std::string env = "BIPAR_" + opt->get_lnames().front();
        for (char& ch : env) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (env != "BIPAR_HELP") opt->envname(env);
    }
    for (CLI::App* sub : app.get_subcommands({})) set_env_names(*sub);
}

// synth gen
void synth_gen(const std::string& config_path, const std::string& out, int count, long long seed) {
    FamilyConfig cfg = config_path.empty() ? FamilyConfig{} : family_config_from_json(read_json(config_path));
    if (count > 0) cfg.sample_count = count;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    validate(cfg);
    write_family(cfg, out);
    std::cout << json{{"out", out}, {"samples", cfg.sample_count}}.dump() << "\n";
}

// synth scene: a random (beta, theta) for a bundle with its posed targets.
void synth_scene(const std::string& bundle_dir, std::uint64_t seed, double sigma_scale, double max_angle,
                 double noise, const std::string& out) {
    const ModelBundle b = load_bundle(bundle_dir);
    const Character& c = b.character;
    Xorshift64Star rng(seed);
    const Eigen::VectorXd sig = c.shape.sigma();
    ShapeParams beta(c.shape.n_components());
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta(i) = rng.uniform(-sigma_scale, sigma_scale) * sig(i);
    PoseParams theta(3 * c.skeleton.joint_count());
    for (int k = 0; k < c.skeleton.joint_count(); ++k) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        theta.segment<3>(3 * k) = axis.normalized() * rng.uniform(0.0, max_angle);
    }
    const PosedCharacter pc = pose_character(c, beta, theta);
    JointPoints joints = pc.joints;
    for (Eigen::Index i = 0; i < joints.size(); ++i) joints.data()[i] += noise * rng.normal();
    write_json(out, {{"seed", seed},
                     {"joint_noise", noise},
                     {"target_vertices", points_to_json(pc.posed.vertices)},
                     {"target_joints", points_to_json(joints)},
                     {"clean_joints", points_to_json(pc.joints)},
                     {"ground_truth", {{"beta", vector_to_json(beta)}, {"theta", vector_to_json(theta)}}}});
    std::cout << json{{"out", out}}.dump() << "\n";
}

// model fit
void model_fit(const std::string& data, Eigen::Index shape_k, Eigen::Index tex_k, const std::string& out) {
    const FamilyData family = load_family(data);
    const ModelBundle b = build_bundle(family, shape_k, tex_k);
    save_bundle(b, out);
    json report = bundle_manifest(b);
    if (b.character.shape.clamped || b.texture.clamped)
        report["warning"] = "component count clamped to training_count - 1";
    std::cout << report.dump() << "\n";
}

// model eval
void model_eval(const std::string& bundle_dir, const std::string& beta_path, const std::string& pose_path,
                const std::string& tex_path, const std::string& out) {
    const ModelBundle b = load_bundle(bundle_dir);
    const Evaluation e =
        evaluate(b, read_vector(beta_path, "beta", b.character.shape.n_components()),
                 read_vector(pose_path, "theta", 3 * b.character.skeleton.joint_count()),
                 read_vector(tex_path, "tex", b.texture.n_components()));
    const auto comma = out.find(',');
    save_mesh(e.posed.posed, out.substr(0, comma));
    if (comma != std::string::npos) save_png(e.texture, out.substr(comma + 1));
}

// fit recover
void fit_recover(const std::string& bundle_dir, const std::string& target_path, const std::string& config_path,
                 const std::string& use, const std::string& out) {
    const ModelBundle b = load_bundle(bundle_dir);
    const Character& c = b.character;
    const json scene = read_json(target_path);
    const FitSettings s = fit_settings_from_json(config_path.empty() ? json() : read_json(config_path));
    FitProblem p{c, std::nullopt, std::nullopt, std::nullopt, s.lambda_s, s.lambda_p};
    const bool want_v = use == "vertices" || use == "both";
    const bool want_j = use == "joints" || use == "both";
    if (want_v && scene.contains("target_vertices"))
        p.target_vertices = points_from_json(scene["target_vertices"], "target_vertices");
    if (want_j && scene.contains("target_joints"))
        p.target_joints = points_from_json(scene["target_joints"], "target_joints");
    require(p.target_vertices || p.target_joints, ErrorKind::invalid_argument,
            target_path + ": no usable targets for --use " + use);
    const FitParams init{ShapeParams::Zero(c.shape.n_components()), PoseParams::Zero(3 * c.skeleton.joint_count())};
    const FitResult r = fit(p, init, s.config);
    json doc = to_json(r);
    if (scene.contains("ground_truth")) {
        const json& gt = scene["ground_truth"];
        const FitParams truth{vector_from_json(gt["beta"], "ground_truth.beta"),
                              vector_from_json(gt["theta"], "ground_truth.theta")};
        require(truth.beta.size() == init.beta.size() && truth.theta.size() == init.theta.size(),
                ErrorKind::dimension_mismatch, "ground truth dimensions differ from the bundle");
        const PosedCharacter pred = pose_character(c, r.params.beta, r.params.theta);
        const PosedCharacter ref = pose_character(c, truth.beta, truth.theta);
        const auto m = eval_metrics(pred.posed.vertices, ref.posed.vertices, pred.joints, ref.joints);
        doc["ground_truth_errors"] = {
            {"beta_inf", (r.params.beta - truth.beta).lpNorm<Eigen::Infinity>()},
            {"theta_inf", (r.params.theta - truth.theta).lpNorm<Eigen::Infinity>()},
            {"l_para", loss_para(r.params, truth)},
            {"l_shape", loss_shape(r.params.beta, truth.beta, truth.theta, c)},
            {"l_pose", loss_pose(r.params.theta, truth.theta, truth.beta, c)},
            {"mpve", m.mpve},
            {"mpjpe", m.mpjpe},
            {"pa_mpjpe", m.pa_mpjpe}};
    }
    write_json(out, doc);
}

// pose retarget
void pose_retarget(const std::string& map_path, const std::string& in, const std::string& out, bool invert) {
    RetargetMap map = retarget_map_from_json(read_json(map_path));
    std::vector<std::string> dst = default_skeleton().joint_names;
    if (invert) {
        std::vector<std::string> original_src = map.src_joints;
        map = inverse_map(map, dst);
        dst = std::move(original_src);
    }
    const PoseSequence src = pose_sequence_from_json(read_json(in));
    PoseSequence res{src.fps, {}};
    for (const auto& f : src.frames) res.frames.push_back(retarget_pose(f, map, dst));
    write_json(out, to_json(res));
}

// eye fit
void eye_fit(const std::string& mesh_path, const std::string& lm_path, double c1, double c2,
             const std::string& out) {
    const Mesh mesh = load_mesh(mesh_path);
    const LandmarkSet lm = landmarks_from_json(read_json(lm_path));
    validate(lm, mesh.vertices.rows());
    json eyes = json::object();
    for (std::size_t s = 0; s < 2; ++s) {
        const std::string name = socket_patch(s);
        if (!lm.patches.contains(name)) continue;
        eyes[name] = to_json(reconstruct_eyeball(fit_socket_circle(mesh, lm.patch(name)), c1, c2));
    }
    require(!eyes.empty(), ErrorKind::unknown_name, lm_path + ": no eye_socket_L / eye_socket_R patches");
    write_json(out, {{"c1", c1}, {"c2", c2}, {"eyes", eyes}});
}

void serve(const std::string& bundle_dir, const std::string& host, int port, int workers) {
    auto bundle = std::make_shared<const ModelBundle>(load_bundle(bundle_dir));
    Service service(bundle, {workers});
    httplib::Server server;
    service.register_routes(server);
    require(server.bind_to_port(host, port), ErrorKind::io,
            "cannot bind " + host + ":" + std::to_string(port));
    std::cout << json{{"listening", host + ":" + std::to_string(port)}}.dump() << std::endl;
    server.listen_after_bind();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parametric biped character engine"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "synthetic character family");
    synth->require_subcommand(1);
    std::string config, out, bundle_dir, data, target, fit_config, use = "both", map_path, in, mesh_path, lm_path;
    std::string beta_path, pose_path, tex_path, host = "127.0.0.1";
    int count = 0, port = 8080, workers = 2;
    long long seed = -1;
    std::uint64_t scene_seed = 1;
    double sigma_scale = 2.0, max_angle = 0.6, noise = 0.0, c1 = 0.9, c2 = 0.35;
    Eigen::Index shape_k = kDefaultShapeComponents, tex_k = 64;
    bool invert = false;

    auto* gen = synth->add_subcommand("gen", "write a family (manifest, OBJs, PNGs)");
    gen->add_option("--config", config, "family config JSON");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--count", count, "override sample_count");
    gen->add_option("--seed", seed, "override seed");

    auto* scene = synth->add_subcommand("scene", "random posed target for a bundle");
    scene->add_option("--bundle", bundle_dir)->required();
    scene->add_option("--seed", scene_seed);
    scene->add_option("--sigma-scale", sigma_scale, "beta drawn in +-scale * sigma");
    scene->add_option("--max-angle", max_angle, "max joint rotation (rad)");
    scene->add_option("--joint-noise", noise, "Gaussian noise on target joints");
    scene->add_option("--out", out)->required();

    auto* model = app.add_subcommand("model", "fit and evaluate bundles");
    model->require_subcommand(1);
    auto* mfit = model->add_subcommand("fit", "fit shape/texture PCA over a family");
    mfit->add_option("--data", data)->required();
    mfit->add_option("--shape-k", shape_k);
    mfit->add_option("--tex-k", tex_k);
    mfit->add_option("--out", out)->required();
    auto* meval = model->add_subcommand("eval", "evaluate shape, pose and texture");
    meval->add_option("--bundle", bundle_dir)->required();
    meval->add_option("--beta", beta_path);
    meval->add_option("--pose", pose_path);
    meval->add_option("--tex", tex_path);
    meval->add_option("--out", out, "mesh.obj[,texture.png]")->required();

    auto* fitc = app.add_subcommand("fit", "parameter recovery");
    fitc->require_subcommand(1);
    auto* recover = fitc->add_subcommand("recover", "recover beta, theta from a target scene");
    recover->add_option("--bundle", bundle_dir)->required();
    recover->add_option("--target", target)->required();
    recover->add_option("--config", fit_config);
    recover->add_option("--use", use)->check(CLI::IsMember({"joints", "vertices", "both"}));
    recover->add_option("--out", out)->required();

    auto* pose = app.add_subcommand("pose", "pose utilities");
    pose->require_subcommand(1);
    auto* retarget = pose->add_subcommand("retarget", "remap a pose sequence");
    retarget->add_option("--map", map_path)->required();
    retarget->add_option("--in", in)->required();
    retarget->add_option("--out", out)->required();
    retarget->add_flag("--invert", invert, "apply the inverse mapping");

    auto* eye = app.add_subcommand("eye", "eyeball reconstruction");
    eye->require_subcommand(1);
    auto* efit = eye->add_subcommand("fit", "fit sockets and seat eyeballs");
    efit->add_option("--mesh", mesh_path)->required();
    efit->add_option("--landmarks", lm_path)->required();
    efit->add_option("--c1", c1);
    efit->add_option("--c2", c2);
    efit->add_option("--out", out)->required();

    auto* srv = app.add_subcommand("serve", "HTTP service");
    srv->add_option("--bundle", bundle_dir)->required();
    srv->add_option("--host", host);
    srv->add_option("--port", port);
    srv->add_option("--fit-workers", workers);

    set_env_names(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) synth_gen(config, out, count, seed);
        else if (scene->parsed()) synth_scene(bundle_dir, scene_seed, sigma_scale, max_angle, noise, out);
        else if (mfit->parsed()) model_fit(data, shape_k, tex_k, out);
        else if (meval->parsed()) model_eval(bundle_dir, beta_path, pose_path, tex_path, out);
        else if (recover->parsed()) fit_recover(bundle_dir, target, fit_config, use, out);
        else if (retarget->parsed()) pose_retarget(map_path, in, out, invert);
        else if (efit->parsed()) eye_fit(mesh_path, lm_path, c1, c2, out);
        else if (srv->parsed()) serve(bundle_dir, host, port, workers);
    } catch (const std::exception& e) {
        std::cerr << error_json(e).dump() << "\n";
        return 1;
    }
    return 0;
}
