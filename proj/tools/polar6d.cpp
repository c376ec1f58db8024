// polar6d: shape-from-polarization toolkit and 6D pose refinement CLI.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

#include "polar6d/datagen.hpp"
#include "polar6d/inverse_model.hpp"
#include "polar6d/io.hpp"
#include "polar6d/losses.hpp"
#include "polar6d/polarimetry.hpp"
#include "polar6d/refiner.hpp"
#include "polar6d/renderer.hpp"
#include "polar6d/sfp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polar6d;

namespace {

Image<double> mask_to_image(const Mask& m) {
    Image<double> out(m.width(), m.height());
    for (size_t p = 0; p < m.size(); ++p) out[p] = m[p] ? 1.0 : 0.0;
    return out;
}

Mask image_to_mask(const Image<double>& img) {
    Mask out(img.width(), img.height());
    for (size_t p = 0; p < img.size(); ++p) out[p] = img[p] > 0.5 ? 1 : 0;
    return out;
}

void write_geometry_buffers(const fs::path& dir, const GeometryBuffers& buf) {
    write_pfm((dir / "mask.pfm").string(), mask_to_image(buf.mask));
    write_pfm((dir / "depth.pfm").string(), buf.depth);
    write_pfm3((dir / "normals.pfm").string(), buf.normal_map);
    write_pfm3((dir / "nocs.pfm").string(), buf.nocs);
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    json j = load_json(config_path);
    SceneConfig cfg = scene_config_from_json(j);
    Mesh mesh = load_mesh(cfg.mesh_path);
    SyntheticScene scene = synthesize_scene(cfg, mesh);
    if (scene.buffers.empty_render)
        std::cerr << "warning: EmptyRender, object projects outside the frame\n";

    fs::path dir(out_dir);
    fs::create_directories(dir);

    json stack_meta;
    stack_meta["angles"] = scene.stack.angles;
    std::vector<std::string> names;
    for (size_t i = 0; i < scene.stack.images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "I_%03zu.pfm", i);
        names.emplace_back(name);
        write_pfm((dir / name).string(), scene.stack.images[i]);
    }
    stack_meta["images"] = names;
    save_json((dir / "stack.json").string(), stack_meta);

    save_json((dir / "gt_pose.json").string(), pose_to_json(scene.gt_pose));
    Image<double> iun(cfg.camera.width, cfg.camera.height);
    Image<double> dop(cfg.camera.width, cfg.camera.height);
    Image<double> aop(cfg.camera.width, cfg.camera.height);
    for (size_t p = 0; p < iun.size(); ++p) {
        iun[p] = scene.gt_polar[p].i_un;
        dop[p] = scene.gt_polar[p].dop;
        aop[p] = scene.gt_polar[p].aop;
    }
    write_pfm((dir / "gt_iun.pfm").string(), iun);
    write_pfm((dir / "gt_dop.pfm").string(), dop);
    write_pfm((dir / "gt_aop.pfm").string(), aop);
    write_pfm((dir / "gt_valid.pfm").string(), mask_to_image(scene.gt_valid));
    write_geometry_buffers(dir, scene.buffers);
    return 0;
}

FilterStack load_stack(const std::string& dir) {
    fs::path base(dir);
    json meta = load_json((base / "stack.json").string());
    require_fields(meta, {"angles", "images"}, {}, "stack");
    FilterStack stack;
    stack.angles = meta.at("angles").get<std::vector<double>>();
    for (const auto& name : meta.at("images").get<std::vector<std::string>>()) {
        stack.images.push_back(read_pfm((base / name).string()));
        stack.width = stack.images.back().width();
        stack.height = stack.images.back().height();
    }
    return stack;
}

int cmd_estimate(const std::string& stack_dir, const std::string& out_dir) {
    FilterStack stack = load_stack(stack_dir);
    PolarEstimate est = estimate_polarisation(stack);

    fs::path dir(out_dir);
    fs::create_directories(dir);
    Image<double> iun(stack.width, stack.height);
    Image<double> dop(stack.width, stack.height);
    Image<double> aop(stack.width, stack.height);
    for (size_t p = 0; p < iun.size(); ++p) {
        iun[p] = est.samples[p].i_un;
        dop[p] = est.samples[p].dop;
        aop[p] = est.samples[p].aop;
    }
    write_pfm((dir / "i_un.pfm").string(), iun);
    write_pfm((dir / "dop.pfm").string(), dop);
    write_pfm((dir / "aop.pfm").string(), aop);
    write_pfm((dir / "residual.pfm").string(), est.residual);
    write_pfm((dir / "valid.pfm").string(), mask_to_image(est.valid));
    return 0;
}

int cmd_normals(const std::string& polar_dir, double eta, const std::string& camera_path,
                const std::string& out_dir) {
    fs::path base(polar_dir);
    Image<double> dop = read_pfm((base / "dop.pfm").string());
    Image<double> aop = read_pfm((base / "aop.pfm").string());
    Mask valid = image_to_mask(read_pfm((base / "valid.pfm").string()));

    Image<PolarSample> polar(dop.width(), dop.height());
    for (size_t p = 0; p < polar.size(); ++p)
        polar[p] = PolarSample{1.0, std::clamp(dop[p], 0.0, 1.0), wrap_pi(aop[p])};

    Material material(eta);
    Image<Eigen::Vector3d> views;
    const Image<Eigen::Vector3d>* views_ptr = nullptr;
    if (!camera_path.empty()) {
        Camera cam = camera_from_json(load_json(camera_path));
        if (cam.width != dop.width() || cam.height != dop.height())
            throw ConfigError("normals: camera resolution does not match the maps");
        views = viewing_vectors(cam);
        views_ptr = &views;
    }
    PlausibleNormals pn = plausible_normals(polar, material, valid, views_ptr);

    fs::path dir(out_dir);
    fs::create_directories(dir);
    write_pfm3((dir / "n_d.pfm").string(), pn.n_d);
    write_pfm3((dir / "n_s1.pfm").string(), pn.n_s1);
    write_pfm3((dir / "n_s2.pfm").string(), pn.n_s2);
    write_pfm((dir / "valid_d.pfm").string(), mask_to_image(pn.valid_d));
    write_pfm((dir / "valid_s1.pfm").string(), mask_to_image(pn.valid_s1));
    write_pfm((dir / "valid_s2.pfm").string(), mask_to_image(pn.valid_s2));
    return 0;
}

int cmd_invert_dop(double rho, double eta) {
    if (rho < 0.0 || rho > 1.0) throw ConfigError("invert-dop: rho must be in [0,1]");
    ZenithSolutions zs = invert_dop(rho, Material(eta));
    json out;
    out["theta_d"] = zs.theta_d ? json(*zs.theta_d) : json(nullptr);
    out["theta_s1"] = zs.theta_s1 ? json(*zs.theta_s1) : json(nullptr);
    out["theta_s2"] = zs.theta_s2 ? json(*zs.theta_s2) : json(nullptr);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_render(const std::string& mesh_path, const std::string& pose_path,
               const std::string& camera_path, const std::string& out_dir) {
    Mesh mesh = load_mesh(mesh_path);
    Pose pose = pose_from_json(load_json(pose_path));
    Camera cam = camera_from_json(load_json(camera_path));
    GeometryBuffers buf = rasterize(mesh, pose, cam);
    if (buf.empty_render)
        std::cerr << "warning: EmptyRender, object projects outside the frame\n";
    fs::path dir(out_dir);
    fs::create_directories(dir);
    write_geometry_buffers(dir, buf);
    return 0;
}

RefineOptions options_from_json(const json& j) {
    require_fields(j, {},
                   {"max_iters", "rot_init_scale", "trans_init_scale", "restarts", "seed",
                    "w_mask_iou", "convergence_tol"},
                   "refine options");
    RefineOptions opt;
    if (j.contains("max_iters")) opt.max_iters = j.at("max_iters");
    if (j.contains("rot_init_scale")) opt.rot_init_scale = j.at("rot_init_scale");
    if (j.contains("trans_init_scale")) opt.trans_init_scale = j.at("trans_init_scale");
    if (j.contains("restarts")) opt.restarts = j.at("restarts");
    if (j.contains("seed")) opt.seed = j.at("seed").get<uint64_t>();
    if (j.contains("w_mask_iou")) opt.w_mask_iou = j.at("w_mask_iou");
    if (j.contains("convergence_tol")) opt.convergence_tol = j.at("convergence_tol");
    opt.validate();
    return opt;
}

int cmd_refine(const std::string& init_path, const std::string& obs_dir,
               const std::string& mesh_path, const std::string& camera_path,
               const std::string& options_path, double eta, const std::string& out_path,
               const std::string& trace_path) {
    Pose init = pose_from_json(load_json(init_path));
    Mesh mesh = load_mesh(mesh_path);
    Camera cam = camera_from_json(load_json(camera_path));
    RefineOptions opt = options_path.empty() ? RefineOptions{}
                                             : options_from_json(load_json(options_path));

    fs::path base(obs_dir);
    Observation obs;
    obs.rho = read_pfm((base / "dop.pfm").string());
    obs.valid = image_to_mask(read_pfm((base / "valid.pfm").string()));
    obs.object_mask = image_to_mask(read_pfm((base / "mask.pfm").string()));
    if (!obs.rho.same_size(cam.width, cam.height))
        throw ConfigError("refine: observation resolution does not match the camera");

    RefineResult res = refine(init, obs, mesh, cam, Material(eta), opt);

    // The output file is a plain pose (readable by `eval`); run diagnostics
    // go to stdout.
    save_json(out_path, pose_to_json(res.pose));
    json diag;
    diag["final_loss"] = res.final_loss;
    diag["status"] = res.status == RefineStatus::Converged ? "converged"
                   : res.status == RefineStatus::IterationLimit ? "iteration-limit"
                                                                : "empty-overlap";
    std::cout << diag.dump(2) << "\n";

    if (!trace_path.empty()) {
        std::ofstream csv(trace_path);
        if (!csv) throw IoError("cannot open " + trace_path + " for writing");
        csv << "iteration,loss,rot_err,trans_err\n";
        csv.precision(17);
        for (const auto& e : res.trace)
            csv << e.iteration << "," << e.loss << "," << e.rot_err_to_init << ","
                << e.trans_err_to_init << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& gt_path, const std::string& pred_path,
             const std::string& mesh_path) {
    Pose gt = pose_from_json(load_json(gt_path));
    Pose pred = pose_from_json(load_json(pred_path));
    Mesh mesh = load_mesh(mesh_path);
    std::string object = fs::path(mesh_path).stem().string();

    double add = add_metric(gt, pred, mesh);
    double adds = adds_metric(gt, pred, mesh);
    double threshold = 0.1 * mesh.diameter;
    std::cout.precision(12);
    std::cout << "object,metric,value,threshold\n"
              << object << ",add," << add << "," << threshold << "\n"
              << object << ",adds," << adds << "," << threshold << "\n"
              << object << ",add_recall," << add_recall({add}, mesh.diameter) << ",50\n"
              << object << ",adds_recall," << add_recall({adds}, mesh.diameter) << ",50\n";
    return 0;
}

int cmd_vis(const std::string& in_path, const std::string& out_path, const std::string& kind) {
    if (kind == "normal") {
        write_visualization(out_path, read_pfm3(in_path));
    } else if (kind == "dop" || kind == "aop") {
        write_visualization(out_path, read_pfm(in_path),
                            kind == "dop" ? VisKind::Dop : VisKind::Aop);
    } else {
        throw ConfigError("vis: kind must be dop, aop or normal");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shape-from-polarization toolkit and 6D pose refinement"};
    app.require_subcommand(1);

    std::string config_path, out_dir, stack_dir, polar_dir, camera_path, mesh_path;
    std::string pose_path, init_path, obs_dir, options_path, out_path, trace_path;
    std::string gt_path, pred_path, in_path, kind;
    double rho = 0.0, eta = 1.5;

    auto* synth = app.add_subcommand("synth", "Synthesize a polarimetric scene");
    synth->add_option("--config", config_path, "Scene config JSON")->required();
    synth->add_option("--out", out_dir, "Output directory")->required();

    auto* estimate = app.add_subcommand("estimate", "Recover the polarization state");
    estimate->add_option("--stack", stack_dir, "Directory with stack.json")->required();
    estimate->add_option("--out", out_dir, "Output directory")->required();

    auto* normals = app.add_subcommand("normals", "Plausible normals from polarization");
    normals->add_option("--polar", polar_dir, "Directory with dop/aop/valid PFMs")->required();
    normals->add_option("--eta", eta, "Refractive index")->default_val(1.5);
    normals->add_option("--camera", camera_path, "Camera JSON for ray-aware reconstruction");
    normals->add_option("--out", out_dir, "Output directory")->required();

    auto* invert = app.add_subcommand("invert-dop", "Zenith solutions for a DoP value");
    invert->add_option("--rho", rho, "Degree of polarization")->required();
    invert->add_option("--eta", eta, "Refractive index")->default_val(1.5);

    auto* render = app.add_subcommand("render", "Rasterize geometry buffers");
    render->add_option("--mesh", mesh_path, "OBJ mesh")->required();
    render->add_option("--pose", pose_path, "Pose JSON")->required();
    render->add_option("--camera", camera_path, "Camera JSON")->required();
    render->add_option("--out", out_dir, "Output directory")->required();

    auto* refine_cmd = app.add_subcommand("refine", "Analysis-by-synthesis pose refinement");
    refine_cmd->add_option("--init", init_path, "Initial pose JSON")->required();
    refine_cmd->add_option("--obs", obs_dir, "Directory with dop/valid/mask PFMs")->required();
    refine_cmd->add_option("--mesh", mesh_path, "OBJ mesh")->required();
    refine_cmd->add_option("--camera", camera_path, "Camera JSON")->required();
    refine_cmd->add_option("--options", options_path, "Refine options JSON");
    refine_cmd->add_option("--eta", eta, "Refractive index")->default_val(1.5);
    refine_cmd->add_option("--out", out_path, "Refined pose JSON")->required();
    refine_cmd->add_option("--trace", trace_path, "Optional trace CSV");

    auto* eval_cmd = app.add_subcommand("eval", "ADD / ADD-S metrics");
    eval_cmd->add_option("--gt", gt_path, "Ground-truth pose JSON")->required();
    eval_cmd->add_option("--pred", pred_path, "Predicted pose JSON")->required();
    eval_cmd->add_option("--mesh", mesh_path, "OBJ mesh")->required();

    auto* vis = app.add_subcommand("vis", "PFM to PNG preview");
    vis->add_option("--in", in_path, "Input PFM")->required();
    vis->add_option("--out", out_path, "Output PNG")->required();
    vis->add_option("--kind", kind, "dop | aop | normal")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_dir);
        if (estimate->parsed()) return cmd_estimate(stack_dir, out_dir);
        if (normals->parsed()) return cmd_normals(polar_dir, eta, camera_path, out_dir);
        if (invert->parsed()) return cmd_invert_dop(rho, eta);
        if (render->parsed()) return cmd_render(mesh_path, pose_path, camera_path, out_dir);
        if (refine_cmd->parsed())
            return cmd_refine(init_path, obs_dir, mesh_path, camera_path, options_path, eta,
                              out_path, trace_path);
        if (eval_cmd->parsed()) return cmd_eval(gt_path, pred_path, mesh_path);
        if (vis->parsed()) return cmd_vis(in_path, out_path, kind);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
