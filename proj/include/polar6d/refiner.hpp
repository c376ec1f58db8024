#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <random>
#include <vector>

#include "polar6d/inverse_model.hpp"
#include "polar6d/losses.hpp"
#include "polar6d/renderer.hpp"

namespace polar6d {

/// Observed polarization data the refiner matches against.
struct Observation {
    Image<double> rho;   // estimated DoP
    Mask valid;          // estimate validity (degenerate pixels excluded)
    Mask object_mask;    // detected object silhouette
};

struct RefineOptions {
    int max_iters = 300;
    double rot_init_scale = 0.2;    // radians
    double trans_init_scale = 0.03; // meters
    int restarts = 2;
    uint64_t seed = 0;
    // Keep the mask term small: it only needs to supply coarse silhouette
    // alignment, while the polarization term carries the fine pose signal.
    // Large weights let single-pixel silhouette steps trap the simplex.
    double w_mask_iou = 0.1;
    double convergence_tol = 1e-10;

    void validate() const {
        if (max_iters < 1 || restarts < 1 || !(rot_init_scale > 0) ||
            !(trans_init_scale > 0) || w_mask_iou < 0)
            throw std::invalid_argument("RefineOptions: invalid settings");
    }
};

enum class RefineStatus { Converged, IterationLimit, EmptyOverlapAtInit };

struct TraceEntry {
    int iteration = 0;
    double loss = 0.0;
    double rot_err_to_init = 0.0;    // radians
    double trans_err_to_init = 0.0;  // meters
};

struct RefineResult {
    Pose pose;
    double final_loss = 0.0;
    std::vector<TraceEntry> trace;  // best-so-far loss, non-increasing
    RefineStatus status = RefineStatus::IterationLimit;
};

inline double mask_iou(const Mask& a, const Mask& b) {
    size_t inter = 0, uni = 0;
    for (size_t p = 0; p < a.size(); ++p) {
        bool pa = a[p] != 0, pb = b[p] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// Render-and-compare objective: L_physics against the observed DoP plus a
/// mask-overlap term. An empty render or empty physics overlap maps to the
/// fixed penalty 10 + w_mask_iou.
inline double objective(const Pose& pose, const Observation& obs, const Mesh& mesh,
                        const Camera& cam, const Material& material,
                        const LossWeights& weights) {
    GeometryBuffers buf = rasterize(mesh, pose, cam);
    if (buf.empty_render) return 10.0 + weights.w_mask_iou;

    Image<double> theta_v = viewing_angle_map(buf, cam);
    AnalyticPolarization analytic = analytic_polarization(theta_v, buf.normal_map,
                                                          buf.mask, material);
    Mask loss_mask(obs.valid.width(), obs.valid.height(), 0);
    for (size_t p = 0; p < loss_mask.size(); ++p)
        loss_mask[p] = obs.valid[p] && obs.object_mask[p];

    PhysicsLossResult phys = physics_loss(obs.rho, analytic, loss_mask);
    if (phys.empty_overlap) return 10.0 + weights.w_mask_iou;
    return phys.value + weights.w_mask_iou * (1.0 - mask_iou(buf.mask, obs.object_mask));
}

namespace detail {

// 6-vector of scaled increments -> pose. First three: axis-angle about the
// initial rotation; last three: translation delta.
inline Pose decode_pose(const Eigen::Matrix<double, 6, 1>& x, const Pose& init,
                        const RefineOptions& opt) {
    Eigen::Vector3d r = x.head<3>() * opt.rot_init_scale;
    Eigen::Vector3d t = x.tail<3>() * opt.trans_init_scale;
    double angle = r.norm();
    Eigen::Matrix3d inc = Eigen::Matrix3d::Identity();
    if (angle > 0)
        inc = Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
    Pose out;
    out.rotation = inc * init.rotation;
    out.translation = init.translation + t;
    return out;
}

} // namespace detail

/// Derivative-free 6D pose refinement: Nelder-Mead over the incremental pose
/// parameters, best of `restarts` seeded starts. Deterministic for fixed
/// inputs and seed. The returned loss never exceeds the initial pose's loss.
inline RefineResult refine(const Pose& initial, const Observation& obs, const Mesh& mesh,
                           const Camera& cam, const Material& material,
                           const RefineOptions& opt) {
    opt.validate();
    initial.validate();
    LossWeights weights;
    weights.w_mask_iou = opt.w_mask_iou;

    using Vec6 = Eigen::Matrix<double, 6, 1>;
    auto eval = [&](const Vec6& x) {
        return objective(detail::decode_pose(x, initial, opt), obs, mesh, cam, material,
                         weights);
    };

    const double penalty = 10.0 + opt.w_mask_iou;
    double init_loss = eval(Vec6::Zero());

    RefineResult result;
    result.pose = initial;
    result.final_loss = init_loss;
    result.trace.push_back({0, init_loss, 0.0, 0.0});
    if (init_loss >= penalty) {
        result.status = RefineStatus::EmptyOverlapAtInit;
        return result;
    }

    Vec6 best_x = Vec6::Zero();
    double best_f = init_loss;
    bool converged = false;
    int iteration = 0;

    auto record = [&](double f, const Vec6& x) {
        if (f < best_f) {
            best_f = f;
            best_x = x;
        }
        Pose p = detail::decode_pose(best_x, initial, opt);
        result.trace.push_back({++iteration, best_f,
                                rotation_angle_between(initial.rotation, p.rotation),
                                (p.translation - initial.translation).norm()});
    };

    for (int restart = 0; restart < opt.restarts; ++restart) {
        std::mt19937_64 rng(opt.seed * 1000003ULL + static_cast<uint64_t>(restart));
        // Jitter grows with the restart index so later rounds can hop out of
        // nearby basins while the best-so-far result is kept.
        const double radius = 0.35 * restart;
        std::uniform_real_distribution<double> jitter(-radius, radius);

        // Later rounds rebuild a fresh simplex around the best point so far,
        // which recovers from simplex collapse on plateaus of the pixelized
        // objective.
        Vec6 x0 = best_x;
        if (restart > 0)
            for (int i = 0; i < 6; ++i) x0[i] += jitter(rng);

        // Initial simplex: x0 plus a unit step along each scaled axis.
        std::array<Vec6, 7> xs;
        std::array<double, 7> fs;
        xs[0] = x0;
        fs[0] = eval(xs[0]);
        record(fs[0], xs[0]);
        for (int i = 0; i < 6; ++i) {
            xs[i + 1] = x0;
            xs[i + 1][i] += 1.0;
            fs[i + 1] = eval(xs[i + 1]);
            record(fs[i + 1], xs[i + 1]);
        }

        std::array<int, 7> order;
        for (int it = 0; it < opt.max_iters; ++it) {
            for (int i = 0; i < 7; ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return fs[a] < fs[b]; });
            const int lo = order[0], hi = order[6], second_hi = order[5];

            if (fs[hi] - fs[lo] < opt.convergence_tol) {
                converged = true;
                break;
            }

            Vec6 centroid = Vec6::Zero();
            for (int i = 0; i < 7; ++i)
                if (i != hi) centroid += xs[i];
            centroid /= 6.0;

            Vec6 reflected = centroid + (centroid - xs[hi]);
            double f_ref = eval(reflected);
            record(f_ref, reflected);

            if (f_ref < fs[lo]) {
                Vec6 expanded = centroid + 2.0 * (centroid - xs[hi]);
                double f_exp = eval(expanded);
                record(f_exp, expanded);
                if (f_exp < f_ref) {
                    xs[hi] = expanded;
                    fs[hi] = f_exp;
                } else {
                    xs[hi] = reflected;
                    fs[hi] = f_ref;
                }
            } else if (f_ref < fs[second_hi]) {
                xs[hi] = reflected;
                fs[hi] = f_ref;
            } else {
                Vec6 contracted = centroid + 0.5 * (xs[hi] - centroid);
                double f_con = eval(contracted);
                record(f_con, contracted);
                if (f_con < fs[hi]) {
                    xs[hi] = contracted;
                    fs[hi] = f_con;
                } else {
                    for (int i = 0; i < 7; ++i) {
                        if (i == lo) continue;
                        xs[i] = xs[lo] + 0.5 * (xs[i] - xs[lo]);
                        fs[i] = eval(xs[i]);
                        record(fs[i], xs[i]);
                    }
                }
            }
        }
    }

    result.pose = detail::decode_pose(best_x, initial, opt);
    result.final_loss = best_f;
    result.status = converged ? RefineStatus::Converged : RefineStatus::IterationLimit;
    return result;
}

} // namespace polar6d
