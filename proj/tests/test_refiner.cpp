#include <catch2/catch_amalgamated.hpp>

#include "polar6d/datagen.hpp"
#include "polar6d/refiner.hpp"
#include "support/fixtures.hpp"

using namespace polar6d;
namespace fx = polar6d::fixtures;

namespace {

struct Fixture {
    Mesh mesh = fx::make_asymmetric_blob();
    Camera cam = fx::make_camera();
    Material material{1.5};
    Pose gt_pose;
    Observation obs;

    explicit Fixture(uint64_t seed = 7) {
        SceneConfig cfg;
        cfg.pose = fx::make_pose({0.3, -0.2, 0.1}, {0, 0, 0.4});
        cfg.camera = cam;
        cfg.background = 0.1;
        cfg.seed = seed;
        gt_pose = cfg.pose;
        SyntheticScene scene = synthesize_scene(cfg, mesh);
        PolarEstimate est = estimate_polarisation(scene.stack);
        obs.rho = Image<double>(cam.width, cam.height);
        for (size_t p = 0; p < obs.rho.size(); ++p) obs.rho[p] = est.samples[p].dop;
        obs.valid = est.valid;
        obs.object_mask = scene.buffers.mask;
    }
};

} // namespace

TEST_CASE("objective at the generating pose is near zero") {
    Fixture f;
    LossWeights w;
    CHECK(objective(f.gt_pose, f.obs, f.mesh, f.cam, f.material, w) < 1e-6);
}

TEST_CASE("objective off-image hits the fixed penalty") {
    Fixture f;
    LossWeights w;
    Pose off = f.gt_pose;
    off.translation = {5.0, 5.0, 0.4};
    CHECK(objective(off, f.obs, f.mesh, f.cam, f.material, w) == 10.0 + w.w_mask_iou);
}

TEST_CASE("objective grows at a perturbed pose") {
    Fixture f;
    LossWeights w;
    Pose off = fx::perturb_pose(f.gt_pose, {1, 0.5, 0}, 5.0 * kPi / 180.0, {0.002, 0, 0});
    CHECK(objective(off, f.obs, f.mesh, f.cam, f.material, w) > 1e-4);
}

TEST_CASE("refine from the optimum stays put") {
    Fixture f;
    RefineOptions opt;
    opt.max_iters = 60;
    opt.restarts = 1;
    RefineResult res = refine(f.gt_pose, f.obs, f.mesh, f.cam, f.material, opt);
    CHECK(res.final_loss <= 1e-6);
    CHECK(rotation_angle_between(res.pose.rotation, f.gt_pose.rotation) < 0.1 * kPi / 180.0);
    CHECK((res.pose.translation - f.gt_pose.translation).norm() < 1e-4);
}

TEST_CASE("refine recovers a perturbed pose") {
    Fixture f;
    Pose init = fx::perturb_pose(f.gt_pose, {0.3, 1.0, -0.2}, 10.0 * kPi / 180.0,
                                 {0.012, -0.01, 0.012});
    RefineOptions opt;
    opt.seed = 1;
    RefineResult res = refine(init, f.obs, f.mesh, f.cam, f.material, opt);

    double add_before = add_metric(f.gt_pose, init, f.mesh);
    double add_after = add_metric(f.gt_pose, res.pose, f.mesh);
    INFO("ADD " << add_before << " -> " << add_after << " (diameter " << f.mesh.diameter
                << ")");
    CHECK(add_after < 0.05 * f.mesh.diameter);
    CHECK(add_after < add_before);
}

TEST_CASE("trace is non-increasing and bounded by the initial loss") {
    Fixture f;
    Pose init = fx::perturb_pose(f.gt_pose, {0, 0, 1}, 8.0 * kPi / 180.0, {0.01, 0.005, 0});
    RefineOptions opt;
    opt.max_iters = 80;
    RefineResult res = refine(init, f.obs, f.mesh, f.cam, f.material, opt);

    REQUIRE(!res.trace.empty());
    double init_loss = res.trace.front().loss;
    double prev = init_loss;
    for (const auto& e : res.trace) {
        CHECK(e.loss <= prev + 1e-15);
        prev = e.loss;
    }
    CHECK(res.final_loss <= init_loss);
    CHECK(res.final_loss == res.trace.back().loss);
}

TEST_CASE("refinement is deterministic") {
    Fixture f;
    Pose init = fx::perturb_pose(f.gt_pose, {1, 0, 0}, 6.0 * kPi / 180.0, {0.005, 0, -0.008});
    RefineOptions opt;
    opt.max_iters = 40;
    opt.seed = 5;
    RefineResult a = refine(init, f.obs, f.mesh, f.cam, f.material, opt);
    RefineResult b = refine(init, f.obs, f.mesh, f.cam, f.material, opt);
    CHECK(a.final_loss == b.final_loss);
    CHECK(a.pose.rotation == b.pose.rotation);
    CHECK(a.pose.translation == b.pose.translation);
    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].loss == b.trace[i].loss);
        CHECK(a.trace[i].rot_err_to_init == b.trace[i].rot_err_to_init);
    }
}

TEST_CASE("empty overlap at init is reported") {
    Fixture f;
    Pose off = f.gt_pose;
    off.translation = {5.0, 5.0, 0.4};
    RefineOptions opt;
    opt.max_iters = 5;
    RefineResult res = refine(off, f.obs, f.mesh, f.cam, f.material, opt);
    CHECK(res.status == RefineStatus::EmptyOverlapAtInit);
    CHECK(res.final_loss == 10.0 + opt.w_mask_iou);
}
