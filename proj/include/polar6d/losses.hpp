#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "polar6d/geometry.hpp"
#include "polar6d/image.hpp"

namespace polar6d {

/// Alternate pose parametrization: normalized image-plane offsets of the
/// projected object center relative to a detection crop, plus center depth.
struct CenterOffsets {
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;  // meters, > 0
};

struct LossWeights {
    double lambda1 = 1.0;     // pose-loss weight in the pseudo loss
    double w_mask_iou = 1.0;  // refiner mask-term weight
};

/// Rotation loss: min over listed symmetries S of avg_x |(R_gt S) x - R_pred x|_1.
inline double loss_rotation(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_pred,
                            const Mesh& mesh) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sym : mesh.symmetries) {
        Eigen::Matrix3d rg = r_gt * sym;
        double sum = 0.0;
        for (const auto& x : mesh.model_points)
            sum += (rg * x - r_pred * x).cwiseAbs().sum();
        best = std::min(best, sum / static_cast<double>(mesh.model_points.size()));
    }
    return best;
}

inline double loss_center(const CenterOffsets& gt, const CenterOffsets& pred) {
    return std::abs(gt.dx - pred.dx) + std::abs(gt.dy - pred.dy);
}

inline double loss_z(double dz_gt, double dz_pred) {
    return std::abs(dz_gt - dz_pred);
}

/// Mean absolute difference over all pixels.
inline double loss_mask(const Image<double>& m_gt, const Image<double>& m_pred) {
    std::vector<double> terms(m_gt.size());
    for (size_t p = 0; p < m_gt.size(); ++p)
        terms[p] = std::abs(m_gt[p] - m_pred[p]);
    return m_gt.size() ? pairwise_sum(terms) / static_cast<double>(m_gt.size()) : 0.0;
}

struct MaskedLossResult {
    double value = 0.0;
    bool empty_mask = false;
};

/// Mask-weighted NOCS L1, normalized by mask area.
inline MaskedLossResult loss_xyz(const Mask& mask,
                                 const Image<Eigen::Vector3d>& xyz_gt,
                                 const Image<Eigen::Vector3d>& xyz_pred) {
    std::vector<double> terms;
    for (size_t p = 0; p < mask.size(); ++p)
        if (mask[p])
            terms.push_back((xyz_gt[p] - xyz_pred[p]).cwiseAbs().sum());
    if (terms.empty()) return {0.0, true};
    return {pairwise_sum(terms) / static_cast<double>(terms.size()), false};
}

/// Mean over mask of 1 - <n, n_hat>; in [0, 2] for unit fields.
inline MaskedLossResult loss_normal(const Image<Eigen::Vector3d>& n_gt,
                                    const Image<Eigen::Vector3d>& n_pred,
                                    const Mask& mask) {
    std::vector<double> terms;
    for (size_t p = 0; p < mask.size(); ++p)
        if (mask[p])
            terms.push_back(1.0 - n_gt[p].dot(n_pred[p]));
    if (terms.empty()) return {0.0, true};
    return {pairwise_sum(terms) / static_cast<double>(terms.size()), false};
}

/// L_pseudo = lambda1 * (L_R + L_center + L_z) + (L_mask + L_normal + L_xyz).
inline double pseudo_loss(double l_rot, double l_center, double l_z,
                          double l_mask, double l_normal, double l_xyz,
                          const LossWeights& weights) {
    return weights.lambda1 * (l_rot + l_center + l_z) + (l_mask + l_normal + l_xyz);
}

/// Pose-trust weight: high when the geometric losses agree.
inline double lambda1_from_geo(double l_geo, double k = 5.0) {
    return std::exp(-k * l_geo);
}

/// ADD: mean distance between corresponding transformed model points.
inline double add_metric(const Pose& gt, const Pose& pred, const Mesh& mesh) {
    double sum = 0.0;
    for (const auto& x : mesh.model_points)
        sum += (gt.apply(x) - pred.apply(x)).norm();
    return sum / static_cast<double>(mesh.model_points.size());
}

/// ADD-S: mean nearest-neighbor distance between the transformed point sets.
inline double adds_metric(const Pose& gt, const Pose& pred, const Mesh& mesh) {
    const size_t n = mesh.model_points.size();
    std::vector<Eigen::Vector3d> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
        a[i] = gt.apply(mesh.model_points[i]);
        b[i] = pred.apply(mesh.model_points[i]);
    }
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < n; ++j)
            best = std::min(best, (a[i] - b[j]).squaredNorm());
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(n);
}

/// Fraction of errors below threshold_fraction * diameter, in percent.
inline double add_recall(const std::vector<double>& errors, double diameter,
                         double threshold_fraction = 0.1) {
    if (errors.empty()) return 0.0;
    size_t hits = 0;
    for (double e : errors)
        if (e < threshold_fraction * diameter) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
}

/// Detection crop on the image plane: center in pixels and a scale used to
/// normalize the center offsets.
struct Crop {
    double cx = 0.0, cy = 0.0;
    double scale = 1.0;  // pixels
};

inline CenterOffsets pose_to_offsets(const Pose& pose, const Camera& cam, const Crop& crop) {
    if (!(crop.scale > 0)) throw std::invalid_argument("InvalidCrop: zero-area crop");
    pose.validate();
    double u = cam.fx * pose.translation.x() / pose.translation.z() + cam.cx;
    double v = cam.fy * pose.translation.y() / pose.translation.z() + cam.cy;
    return {(u - crop.cx) / crop.scale, (v - crop.cy) / crop.scale, pose.translation.z()};
}

inline Pose offsets_to_pose(const CenterOffsets& off, const Eigen::Matrix3d& rotation,
                            const Camera& cam, const Crop& crop) {
    if (!(crop.scale > 0)) throw std::invalid_argument("InvalidCrop: zero-area crop");
    double u = crop.cx + off.dx * crop.scale;
    double v = crop.cy + off.dy * crop.scale;
    Pose pose;
    pose.rotation = rotation;
    pose.translation = {(u - cam.cx) / cam.fx * off.dz,
                        (v - cam.cy) / cam.fy * off.dz,
                        off.dz};
    return pose;
}

} // namespace polar6d
