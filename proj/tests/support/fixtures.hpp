#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

#include "polar6d/geometry.hpp"
#include "polar6d/polarimetry.hpp"

namespace polar6d::fixtures {

/// UV sphere with exact per-vertex normals.
inline Mesh make_uv_sphere(double radius = 0.05, int segments = 48, int rings = 24) {
    Mesh mesh;
    for (int r = 0; r <= rings; ++r) {
        double theta = kPi * r / rings;
        for (int s = 0; s < segments; ++s) {
            double phi = 2.0 * kPi * s / segments;
            Eigen::Vector3d d(std::sin(theta) * std::cos(phi),
                              std::sin(theta) * std::sin(phi), std::cos(theta));
            mesh.vertices.push_back(radius * d);
            mesh.vertex_normals.push_back(d);
        }
    }
    auto idx = [&](int r, int s) { return r * segments + (s % segments); };
    for (int r = 0; r < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            int a = idx(r, s), b = idx(r + 1, s), c = idx(r + 1, s + 1), d = idx(r, s + 1);
            if (r > 0) mesh.faces.push_back({a, b, d});
            if (r < rings - 1) mesh.faces.push_back({b, c, d});
        }
    finalize_mesh(mesh);
    return mesh;
}

/// Smooth star-shaped blob with no rotational or mirror symmetry, used as
/// the standard asymmetric test object.
inline Mesh make_asymmetric_blob(double base_radius = 0.05, int segments = 48,
                                 int rings = 24) {
    Mesh mesh = make_uv_sphere(1.0, segments, rings);
    for (auto& v : mesh.vertices) {
        Eigen::Vector3d d = v;  // unit direction
        // Lobed radial field: strong enough that the surface-slope pattern
        // (not just the silhouette) pins down the orientation.
        double r = 1.0 + 0.30 * d.x() * d.x() + 0.22 * d.x() * d.y() + 0.16 * d.y()
                 - 0.12 * d.z() * d.x() + 0.10 * d.z()
                 + 0.18 * std::sin(3.0 * std::atan2(d.y(), d.x())) * d.x() * d.x()
                 + 0.12 * std::cos(2.0 * std::asin(std::clamp(d.z(), -1.0, 1.0)));
        v = base_radius * r * d;
    }
    mesh.vertex_normals.clear();
    finalize_mesh(mesh);
    return mesh;
}

/// Two camera-facing triangles forming an axis-aligned square of side
/// `side`, at z = 0 in the object frame, normals (0,0,-1).
inline Mesh make_facing_square(double side = 0.1) {
    Mesh mesh;
    double h = side / 2.0;
    mesh.vertices = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
    mesh.vertex_normals.assign(4, Eigen::Vector3d(0, 0, -1));
    mesh.faces = {{0, 1, 2}, {0, 2, 3}};
    sample_model_points(mesh);
    compute_nocs_box(mesh);
    return mesh;
}

inline Camera make_camera(int width = 160, int height = 120, double f = 260.0) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = f;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    return cam;
}

inline Pose make_pose(const Eigen::Vector3d& axis_angle, const Eigen::Vector3d& t) {
    Pose pose;
    double angle = axis_angle.norm();
    if (angle > 0)
        pose.rotation = Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
    pose.translation = t;
    return pose;
}

inline Pose perturb_pose(const Pose& pose, const Eigen::Vector3d& rot_axis, double rot_angle,
                         const Eigen::Vector3d& trans_delta) {
    Pose out;
    out.rotation =
        Eigen::AngleAxisd(rot_angle, rot_axis.normalized()).toRotationMatrix() * pose.rotation;
    out.translation = pose.translation + trans_delta;
    return out;
}

inline const char* unit_cube_obj() {
    return "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
           "v 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
           "f 1 2 3 4\nf 8 7 6 5\nf 1 5 6 2\nf 2 6 7 3\nf 3 7 8 4\nf 4 8 5 1\n";
}

} // namespace polar6d::fixtures
