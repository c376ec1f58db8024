#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "polar6d/geometry.hpp"
#include "polar6d/image.hpp"

namespace polar6d {

/// Z-buffered rasterization output. mask is true exactly where depth is
/// present; normals and NOCS are defined only inside the mask.
struct GeometryBuffers {
    Image<Eigen::Vector3d> normal_map;  // camera frame, unit norm inside mask
    Image<double> depth;                // meters, 0 outside mask
    Mask mask;
    Image<Eigen::Vector3d> nocs;        // in [0,1]^3 inside mask
    bool empty_render = false;          // nothing projected into the frame
};

/// Per-pixel unit rays from the camera center through each pixel.
inline Image<Eigen::Vector3d> viewing_vectors(const Camera& cam) {
    cam.validate();
    Image<Eigen::Vector3d> out(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            Eigen::Vector3d v((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
            out(x, y) = v.normalized();
        }
    return out;
}

namespace detail {

inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Top-left fill convention for an edge a->b of a counter-clockwise triangle.
inline bool edge_accepts(double w, double ax, double ay, double bx, double by) {
    if (w > 0.0) return true;
    if (w < 0.0) return false;
    double dx = bx - ax, dy = by - ay;
    return (dy < 0.0) || (dy == 0.0 && dx > 0.0);  // left edge or top edge
}

} // namespace detail

/// Perspective rasterization of a mesh under a pose. Vertex normals are
/// rotated into the camera frame and interpolated perspective-correct;
/// NOCS coordinates are interpolated the same way. Sequential over
/// triangles, so output is deterministic.
inline GeometryBuffers rasterize(const Mesh& mesh, const Pose& pose, const Camera& cam) {
    cam.validate();
    pose.validate();

    GeometryBuffers buf;
    buf.normal_map = Image<Eigen::Vector3d>(cam.width, cam.height, Eigen::Vector3d::Zero());
    buf.depth = Image<double>(cam.width, cam.height, 0.0);
    buf.mask = Mask(cam.width, cam.height, 0);
    buf.nocs = Image<Eigen::Vector3d>(cam.width, cam.height, Eigen::Vector3d::Zero());

    Image<double> zbuf(cam.width, cam.height, std::numeric_limits<double>::infinity());

    const size_t nv = mesh.vertices.size();
    std::vector<Eigen::Vector3d> cam_pos(nv), cam_nrm(nv), nocs(nv);
    std::vector<double> sx(nv), sy(nv);
    for (size_t i = 0; i < nv; ++i) {
        cam_pos[i] = pose.apply(mesh.vertices[i]);
        cam_nrm[i] = pose.rotation * mesh.vertex_normals[i];
        nocs[i] = mesh.nocs_of(mesh.vertices[i]);
        double z = cam_pos[i].z();
        if (z > 0) {
            sx[i] = cam.fx * cam_pos[i].x() / z + cam.cx;
            sy[i] = cam.fy * cam_pos[i].y() / z + cam.cy;
        }
    }

    constexpr double kNear = 1e-6;
    constexpr double kDepthBias = 1e-9;

    for (const auto& f : mesh.faces) {
        const int i0 = f[0], i1 = f[1], i2 = f[2];
        if (cam_pos[i0].z() <= kNear || cam_pos[i1].z() <= kNear || cam_pos[i2].z() <= kNear)
            continue;  // no near-plane clipping; skip instead

        double x0 = sx[i0], y0 = sy[i0];
        double x1 = sx[i1], y1 = sy[i1];
        double x2 = sx[i2], y2 = sy[i2];

        double area = detail::edge_fn(x0, y0, x1, y1, x2, y2);
        if (area == 0.0) continue;
        if (area < 0.0) {  // reorder so edge functions are positive inside
            std::swap(x1, x2);
            std::swap(y1, y2);
        }
        double abs_area = std::abs(area);
        bool flipped = area < 0.0;
        const int j1 = flipped ? i2 : i1;
        const int j2 = flipped ? i1 : i2;

        int min_x = std::max(0, (int)std::floor(std::min({x0, x1, x2}) - 0.5));
        int max_x = std::min(cam.width - 1, (int)std::ceil(std::max({x0, x1, x2}) + 0.5));
        int min_y = std::max(0, (int)std::floor(std::min({y0, y1, y2}) - 0.5));
        int max_y = std::min(cam.height - 1, (int)std::ceil(std::max({y0, y1, y2}) + 0.5));

        const double z0 = cam_pos[i0].z(), z1 = cam_pos[j1].z(), z2 = cam_pos[j2].z();

        for (int py = min_y; py <= max_y; ++py) {
            for (int px = min_x; px <= max_x; ++px) {
                const double cxp = px + 0.5, cyp = py + 0.5;
                double w0 = detail::edge_fn(x1, y1, x2, y2, cxp, cyp);
                double w1 = detail::edge_fn(x2, y2, x0, y0, cxp, cyp);
                double w2 = detail::edge_fn(x0, y0, x1, y1, cxp, cyp);
                if (!detail::edge_accepts(w0, x1, y1, x2, y2) ||
                    !detail::edge_accepts(w1, x2, y2, x0, y0) ||
                    !detail::edge_accepts(w2, x0, y0, x1, y1))
                    continue;

                double b0 = w0 / abs_area, b1 = w1 / abs_area, b2 = w2 / abs_area;
                // Perspective-correct weights.
                double q0 = b0 / z0, q1 = b1 / z1, q2 = b2 / z2;
                double qs = q0 + q1 + q2;
                double z = 1.0 / qs;
                if (z + kDepthBias >= zbuf(px, py)) continue;

                q0 /= qs; q1 /= qs; q2 /= qs;
                Eigen::Vector3d n = q0 * cam_nrm[i0] + q1 * cam_nrm[j1] + q2 * cam_nrm[j2];
                double len = n.norm();
                if (len > 0) n /= len;

                zbuf(px, py) = z;
                buf.depth(px, py) = z;
                buf.mask(px, py) = 1;
                buf.normal_map(px, py) = n;
                Eigen::Vector3d c = q0 * nocs[i0] + q1 * nocs[j1] + q2 * nocs[j2];
                buf.nocs(px, py) = c.cwiseMax(0.0).cwiseMin(1.0);
            }
        }
    }

    buf.empty_render = true;
    for (auto m : buf.mask.pixels())
        if (m) { buf.empty_render = false; break; }
    return buf;
}

} // namespace polar6d
