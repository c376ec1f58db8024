#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polar6d/inverse_model.hpp"
#include "polar6d/io.hpp"
#include "polar6d/polarimetry.hpp"
#include "polar6d/renderer.hpp"

namespace polar6d {

enum class SceneReflection { Diffuse, Specular, Mixed };

/// Everything needed to synthesize one polarimetric scene.
struct SceneConfig {
    std::string mesh_path;
    Pose pose;
    Camera camera;
    double eta = 1.5;
    SceneReflection reflection_mode = SceneReflection::Diffuse;
    double specular_fraction = 0.0;  // per-pixel specular probability in mixed mode
    std::vector<double> filter_angles{0.0, kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0};
    double noise_sigma = 0.0;        // Gaussian, intensity units
    int quantize_bits = 0;           // 0 = off, else 8 or 12
    double background = 0.0;         // unpolarized background intensity
    uint64_t seed = 0;

    void validate() const {
        camera.validate();
        pose.validate();
        if (!(noise_sigma >= 0)) throw ConfigError("scene: noise sigma must be >= 0");
        if (specular_fraction < 0 || specular_fraction > 1)
            throw ConfigError("scene: specular_fraction must be in [0,1]");
        if (quantize_bits != 0 && quantize_bits != 8 && quantize_bits != 12)
            throw ConfigError("scene: quantize_bits must be 0, 8 or 12");
        if (filter_angles.size() < 3) throw ConfigError("scene: need >= 3 filter angles");
    }
};

inline SceneConfig scene_config_from_json(const nlohmann::json& j) {
    require_fields(j, {"mesh", "pose", "camera", "eta", "reflection_mode", "background", "seed"},
                   {"specular_fraction", "filter_angles", "noise_sigma", "quantize_bits"},
                   "scene config");
    SceneConfig cfg;
    cfg.mesh_path = j.at("mesh").get<std::string>();
    cfg.pose = pose_from_json(j.at("pose"));
    cfg.camera = camera_from_json(j.at("camera"));
    cfg.eta = j.at("eta").get<double>();
    std::string mode = j.at("reflection_mode").get<std::string>();
    if (mode == "diffuse") cfg.reflection_mode = SceneReflection::Diffuse;
    else if (mode == "specular") cfg.reflection_mode = SceneReflection::Specular;
    else if (mode == "mixed") cfg.reflection_mode = SceneReflection::Mixed;
    else throw ConfigError("scene: unknown reflection_mode '" + mode + "'");
    if (j.contains("specular_fraction"))
        cfg.specular_fraction = j.at("specular_fraction").get<double>();
    if (j.contains("filter_angles"))
        cfg.filter_angles = j.at("filter_angles").get<std::vector<double>>();
    if (j.contains("noise_sigma")) cfg.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("quantize_bits")) cfg.quantize_bits = j.at("quantize_bits").get<int>();
    cfg.background = j.at("background").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.validate();
    return cfg;
}

/// One synthesized scene: the intensity stack plus all ground truth.
struct SyntheticScene {
    FilterStack stack;
    GeometryBuffers buffers;
    Image<PolarSample> gt_polar;
    Mask gt_valid;   // non-degenerate ground-truth pixels
    Pose gt_pose;
};

/// Forward pipeline: rasterize, Fresnel DoP / azimuth AoP per reflection
/// mode, filter intensities, then seeded noise and optional quantization.
/// Deterministic for a fixed config (including seed).
inline SyntheticScene synthesize_scene(const SceneConfig& cfg, const Mesh& mesh) {
    cfg.validate();
    const Material material(cfg.eta);
    const Camera& cam = cfg.camera;

    SyntheticScene scene;
    scene.gt_pose = cfg.pose;
    scene.buffers = rasterize(mesh, cfg.pose, cam);

    Image<double> theta_v = viewing_angle_map(scene.buffers, cam);
    scene.gt_polar = Image<PolarSample>(cam.width, cam.height);
    scene.gt_valid = Mask(cam.width, cam.height, 0);

    std::mt19937_64 rng(cfg.seed);
    std::bernoulli_distribution pick_specular(cfg.specular_fraction);

    const double object_intensity = 1.0;
    for (size_t p = 0; p < scene.gt_polar.size(); ++p) {
        PolarSample s;
        if (scene.buffers.mask[p]) {
            bool specular = cfg.reflection_mode == SceneReflection::Specular ||
                            (cfg.reflection_mode == SceneReflection::Mixed && pick_specular(rng));
            const Eigen::Vector3d& n = scene.buffers.normal_map[p];
            double az = std::atan2(n.y(), n.x());
            s.i_un = object_intensity;
            s.dop = specular ? dop_specular(theta_v[p], material)
                             : dop_diffuse(theta_v[p], material);
            s.aop = specular ? wrap_pi(az - kPi / 2.0) : wrap_pi(az);
            scene.gt_valid[p] = 1;
        } else {
            s.i_un = cfg.background;
            s.dop = 0.0;
            s.aop = 0.0;
            scene.gt_valid[p] = cfg.background > 0 ? 1 : 0;
        }
        scene.gt_polar[p] = s;
    }

    scene.stack.angles = cfg.filter_angles;
    scene.stack.width = cam.width;
    scene.stack.height = cam.height;
    for (double phi_pol : cfg.filter_angles) {
        Image<double> img(cam.width, cam.height);
        for (size_t p = 0; p < img.size(); ++p)
            img[p] = forward_intensity(scene.gt_polar[p], phi_pol);
        scene.stack.images.push_back(std::move(img));
    }

    if (cfg.noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (auto& img : scene.stack.images)
            for (auto& v : img.pixels()) v = std::max(0.0, v + noise(rng));
    }
    if (cfg.quantize_bits > 0) {
        double full_scale = 0.0;
        for (const auto& img : scene.stack.images)
            for (double v : img.pixels()) full_scale = std::max(full_scale, v);
        if (full_scale > 0) {
            const double levels = static_cast<double>((1 << cfg.quantize_bits) - 1);
            for (auto& img : scene.stack.images)
                for (auto& v : img.pixels()) {
                    double q = std::round(std::clamp(v / full_scale, 0.0, 1.0) * levels);
                    v = q / levels * full_scale;
                }
        }
    }
    return scene;
}

} // namespace polar6d
