#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "pelical/geometry.h"

namespace pelical {

// Intrinsic X-Y-Z Euler angles (roll, pitch, yaw) in degrees with R = Rx(roll) Ry(pitch) Rz(yaw).
// Throws InvalidInput for |pitch| >= 85 degrees, where the decomposition is ill-defined.
Eigen::Vector3d euler_xyz_deg(const Eigen::Matrix3d &R);

struct PoseVariationErrors {
    std::vector<double> rotation_deg;   // ||(theta_{i+1} - theta_i) - (0, step, 0)||
    std::vector<double> translation_cm; // | ||t_{i+1} - t_i|| - step |
};

// Step errors between consecutive poses of one group; the varied angle is the middle (pitch) component.
PoseVariationErrors pose_variation_errors(std::span<const Extrinsics> poses, double step_rot_deg = 20.0,
                                          double step_trans_cm = 5.0);

// Unit normal n and signed offset with n' x = offset and offset >= 0.
struct Plane {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;
};

// Total least squares plane. Throws IllConditionedPlane unless the two largest covariance
// eigenvalues exceed 100 times the smallest.
Plane fit_plane(std::span<const Eigen::Vector3d> points);

struct PlaneMergeInput {
    std::vector<Eigen::Vector3d> target_points;
    std::vector<Eigen::Vector3d> source_points;
    std::optional<std::array<Eigen::Vector3d, 2>> target_corners;
    std::optional<std::array<Eigen::Vector3d, 2>> source_corners;
    std::optional<int> squares_per_row;
};

struct PlaneMergeMetrics {
    std::optional<double> l_mm;
    double d_mm = 0.0;
    double theta_deg = 0.0;
};

PlaneMergeMetrics plane_merge_metrics(const PlaneMergeInput &input, const Extrinsics &T, double square_mm = 108.0);

} // namespace pelical
