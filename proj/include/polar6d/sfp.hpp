#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "polar6d/image.hpp"
#include "polar6d/polarimetry.hpp"

namespace polar6d {

/// Per-pixel candidate normals consistent with the measured polarization:
/// one diffuse, two specular. Normals use the polarization convention
/// (z component toward the camera, so a head-on surface is (0,0,1)).
struct PlausibleNormals {
    Image<Eigen::Vector3d> n_d, n_s1, n_s2;
    Mask valid_d, valid_s1, valid_s2;
};

namespace detail {

// Normals with image-plane azimuth `azimuth` whose angle to the reversed
// viewing ray `view` (camera toward scene, view.z > 0) is `zenith`.
// The cone/half-plane intersection has zero, one or two solutions.
inline void append_view_solutions(double azimuth, double zenith,
                                  const Eigen::Vector3d& view,
                                  std::vector<Eigen::Vector3d>& out) {
    const double ca = std::cos(azimuth), sa = std::sin(azimuth);
    const double a = ca * view.x() + sa * view.y();
    const double vz = view.z();
    const double c = std::cos(zenith);
    const double disc = a * a + vz * vz - c * c;
    if (disc < 0.0) return;
    const double root = vz * std::sqrt(disc);
    for (double s : {(-a * c + root) / (a * a + vz * vz),
                     (-a * c - root) / (a * a + vz * vz)}) {
        if (s < -1e-12) continue;
        s = std::max(s, 0.0);
        out.emplace_back(Eigen::Vector3d(s * ca, s * sa, (c + s * a) / vz).normalized());
        if (root == 0.0) break;  // double root, one solution
    }
}

} // namespace detail

/// All normals consistent with a measured AoP and a zenith solution: both
/// pi-ambiguous azimuth representatives, and for a per-pixel viewing ray
/// both cone intersections. Without `view` the zenith is taken about the
/// optical axis and the list has exactly the two azimuth representatives.
/// Order is deterministic (ascending azimuth, principal solution first).
inline std::vector<Eigen::Vector3d> candidate_normals(double aop, double zenith,
                                                      ReflectionMode mode,
                                                      const Eigen::Vector3d* view = nullptr) {
    auto [az_a, az_b] = aop_to_azimuth(aop, mode);
    if (az_b < az_a) std::swap(az_a, az_b);
    std::vector<Eigen::Vector3d> out;
    for (double az : {az_a, az_b}) {
        if (view)
            detail::append_view_solutions(az, zenith, *view, out);
        else
            out.push_back(normal_from_angles(az, zenith));
    }
    return out;
}

/// Angle to `reference` minimized over the physically ambiguous candidate
/// set. Both sides in the polarization convention.
inline double candidate_angular_error(double aop, double zenith, ReflectionMode mode,
                                      const Eigen::Vector3d& reference,
                                      const Eigen::Vector3d* view = nullptr) {
    double best = kPi;
    for (const auto& n : candidate_normals(aop, zenith, mode, view))
        best = std::min(best, std::acos(std::clamp(n.dot(reference), -1.0, 1.0)));
    return best;
}

/// Builds the three per-pixel normal candidates from an estimated
/// polarization map. When `view_dirs` is given (from viewing_vectors), the
/// reconstruction inverts the ray-based viewing angle exactly; otherwise the
/// zenith is taken about the optical axis (orthographic approximation).
/// The stored representative is the first of the deterministic candidate
/// order; the pi-ambiguity itself is left to consumers.
inline PlausibleNormals plausible_normals(const Image<PolarSample>& polar_map,
                                          const Material& material,
                                          const Mask& valid,
                                          const Image<Eigen::Vector3d>* view_dirs = nullptr) {
    const int w = polar_map.width(), h = polar_map.height();
    PlausibleNormals out;
    out.n_d = out.n_s1 = out.n_s2 =
        Image<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero());
    out.valid_d = out.valid_s1 = out.valid_s2 = Mask(w, h, 0);

    parallel_for(polar_map.size(), [&](size_t p) {
        if (!valid[p]) return;
        const PolarSample& s = polar_map[p];
        ZenithSolutions zs = invert_dop(s.dop, material);
        const Eigen::Vector3d* view = view_dirs ? &(*view_dirs)[p] : nullptr;

        auto store = [&](const std::optional<double>& zenith, ReflectionMode mode,
                         Eigen::Vector3d& n, uint8_t& flag) {
            if (!zenith) return;
            auto cands = candidate_normals(s.aop, *zenith, mode, view);
            if (cands.empty()) return;
            n = cands.front();
            flag = 1;
        };
        store(zs.theta_d, ReflectionMode::Diffuse, out.n_d[p], out.valid_d[p]);
        store(zs.theta_s1, ReflectionMode::Specular, out.n_s1[p], out.valid_s1[p]);
        store(zs.theta_s2, ReflectionMode::Specular, out.n_s2[p], out.valid_s2[p]);
    });
    return out;
}

} // namespace polar6d
