#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace polar6d {

/// Pinhole camera, pixels. The camera looks along +z; y points down the image.
struct Camera {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (!(fx > 0 && fy > 0))
            throw std::invalid_argument("Camera: focal lengths must be positive");
        if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
            throw std::invalid_argument("Camera: principal point outside image");
    }
};

/// Rigid transform from object frame to camera frame.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    void validate() const {
        Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
        if (err.cwiseAbs().maxCoeff() >= 1e-9 || rotation.determinant() <= 0)
            throw std::invalid_argument("Pose: rotation is not a proper rotation matrix");
        if (!(translation.z() > 0))
            throw std::invalid_argument("Pose: object must be in front of the camera");
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }
};

/// Geodesic distance between two rotations, radians.
inline double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Triangle mesh in object frame with the sampled model points used by the
/// pose losses and ADD metrics.
struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<Eigen::Vector3d> vertex_normals;
    std::vector<std::array<int, 3>> faces;
    std::vector<Eigen::Vector3d> model_points;
    double diameter = 0.0;
    std::vector<Eigen::Matrix3d> symmetries{Eigen::Matrix3d::Identity()};
    Eigen::Vector3d nocs_min = Eigen::Vector3d::Zero();
    Eigen::Vector3d nocs_max = Eigen::Vector3d::Ones();

    Eigen::Vector3d nocs_of(const Eigen::Vector3d& p) const {
        Eigen::Vector3d span = nocs_max - nocs_min;
        Eigen::Vector3d q;
        for (int i = 0; i < 3; ++i)
            q[i] = span[i] > 0 ? (p[i] - nocs_min[i]) / span[i] : 0.5;
        return q;
    }
};

/// Area-weighted vertex normals for meshes that carry none.
inline void compute_vertex_normals(Mesh& mesh) {
    mesh.vertex_normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& f : mesh.faces) {
        Eigen::Vector3d e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        Eigen::Vector3d e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        Eigen::Vector3d n = e1.cross(e2);  // magnitude = 2 * area
        for (int k = 0; k < 3; ++k) mesh.vertex_normals[f[k]] += n;
    }
    for (auto& n : mesh.vertex_normals) {
        double len = n.norm();
        if (len > 0) n /= len;
        else n = Eigen::Vector3d::UnitZ();
    }
}

/// Deterministic farthest-point sampling, up to max_points, started at
/// vertex 0. Also computes the exact max pairwise distance over the sample.
inline void sample_model_points(Mesh& mesh, size_t max_points = 1024) {
    mesh.model_points.clear();
    const auto& verts = mesh.vertices;
    if (verts.empty()) return;
    if (verts.size() <= max_points) {
        mesh.model_points = verts;
    } else {
        std::vector<double> dist(verts.size(), std::numeric_limits<double>::infinity());
        size_t current = 0;
        for (size_t n = 0; n < max_points; ++n) {
            mesh.model_points.push_back(verts[current]);
            size_t next = 0;
            double best = -1.0;
            for (size_t i = 0; i < verts.size(); ++i) {
                dist[i] = std::min(dist[i], (verts[i] - verts[current]).norm());
                if (dist[i] > best) {
                    best = dist[i];
                    next = i;
                }
            }
            current = next;
        }
    }
    double d2 = 0.0;
    for (size_t i = 0; i < mesh.model_points.size(); ++i)
        for (size_t j = i + 1; j < mesh.model_points.size(); ++j)
            d2 = std::max(d2, (mesh.model_points[i] - mesh.model_points[j]).squaredNorm());
    mesh.diameter = std::sqrt(d2);
}

/// Axis-aligned bounding box of the vertices, used for NOCS normalization.
inline void compute_nocs_box(Mesh& mesh) {
    if (mesh.vertices.empty()) return;
    mesh.nocs_min = mesh.nocs_max = mesh.vertices[0];
    for (const auto& v : mesh.vertices) {
        mesh.nocs_min = mesh.nocs_min.cwiseMin(v);
        mesh.nocs_max = mesh.nocs_max.cwiseMax(v);
    }
}

/// Fills in normals, model points, diameter and the NOCS box.
inline void finalize_mesh(Mesh& mesh) {
    if (mesh.vertex_normals.size() != mesh.vertices.size())
        compute_vertex_normals(mesh);
    sample_model_points(mesh);
    compute_nocs_box(mesh);
}

} // namespace polar6d
