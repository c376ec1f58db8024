#pragma once

#include <Eigen/Dense>

#include "polar6d/image.hpp"
#include "polar6d/polarimetry.hpp"
#include "polar6d/renderer.hpp"

namespace polar6d {

/// Analytic polarization predicted from a rendered normal map: diffuse and
/// specular DoP maps plus the corresponding AoP maps.
struct AnalyticPolarization {
    Image<double> rho_d_hat, rho_s_hat;  // in [0,1] inside valid
    Image<double> phi_d_hat, phi_s_hat;  // in [0,pi) inside valid
    Mask valid;
};

/// Viewing angle per mask pixel: theta_v = acos(|n . (-v)|), in [0, pi/2].
inline Image<double> viewing_angle_map(const GeometryBuffers& buffers, const Camera& cam) {
    Image<Eigen::Vector3d> views = viewing_vectors(cam);
    Image<double> out(buffers.mask.width(), buffers.mask.height(), 0.0);
    parallel_for(out.size(), [&](size_t p) {
        if (!buffers.mask[p]) return;
        double c = std::abs(buffers.normal_map[p].dot(-views[p]));
        out[p] = std::acos(std::clamp(c, 0.0, 1.0));
    });
    return out;
}

/// Evaluates the Fresnel DoP curves at the viewing angles and derives the
/// analytic AoP from the normal azimuth (specular branch shifted by pi/2).
inline AnalyticPolarization analytic_polarization(const Image<double>& theta_v_map,
                                                  const Image<Eigen::Vector3d>& normal_map,
                                                  const Mask& mask,
                                                  const Material& material) {
    const int w = theta_v_map.width(), h = theta_v_map.height();
    AnalyticPolarization out;
    out.rho_d_hat = Image<double>(w, h, 0.0);
    out.rho_s_hat = Image<double>(w, h, 0.0);
    out.phi_d_hat = Image<double>(w, h, 0.0);
    out.phi_s_hat = Image<double>(w, h, 0.0);
    out.valid = mask;

    parallel_for(theta_v_map.size(), [&](size_t p) {
        if (!mask[p]) return;
        double t = theta_v_map[p];
        out.rho_d_hat[p] = dop_diffuse(t, material);
        out.rho_s_hat[p] = dop_specular(t, material);
        double az = std::atan2(normal_map[p].y(), normal_map[p].x());
        out.phi_d_hat[p] = wrap_pi(az);
        out.phi_s_hat[p] = wrap_pi(az - kPi / 2.0);
    });
    return out;
}

struct PhysicsLossResult {
    double value = 0.0;
    bool empty_overlap = false;
};

/// L_physics: mean over mask & valid of min(|rho - rho_d_hat|, |rho - rho_s_hat|).
/// Deterministic pairwise reduction.
inline PhysicsLossResult physics_loss(const Image<double>& observed_rho,
                                      const AnalyticPolarization& analytic,
                                      const Mask& mask) {
    std::vector<double> terms;
    terms.reserve(mask.size());
    for (size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p] || !analytic.valid[p]) continue;
        double rho = observed_rho[p];
        terms.push_back(std::min(std::abs(rho - analytic.rho_d_hat[p]),
                                 std::abs(rho - analytic.rho_s_hat[p])));
    }
    if (terms.empty()) return {0.0, true};
    return {pairwise_sum(terms) / static_cast<double>(terms.size()), false};
}

} // namespace polar6d
