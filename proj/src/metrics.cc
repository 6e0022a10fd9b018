#include "pelical/metrics.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pelical {

namespace {
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
}

Eigen::Vector3d euler_xyz_deg(const Eigen::Matrix3d &R) {
    const double pitch = std::asin(std::clamp(R(0, 2), -1.0, 1.0));
    if (std::abs(pitch) * kRadToDeg >= 85.0) {
        throw Error(ErrorCode::InvalidInput, "Euler extraction restricted to |pitch| < 85 degrees");
    }
    const double roll = std::atan2(-R(1, 2), R(2, 2));
    const double yaw = std::atan2(-R(0, 1), R(0, 0));
    return Eigen::Vector3d(roll, pitch, yaw) * kRadToDeg;
}

PoseVariationErrors pose_variation_errors(std::span<const Extrinsics> poses, double step_rot_deg,
                                          double step_trans_cm) {
    PoseVariationErrors out;
    for (size_t i = 0; i + 1 < poses.size(); ++i) {
        const Eigen::Vector3d delta = euler_xyz_deg(poses[i + 1].R) - euler_xyz_deg(poses[i].R);
        out.rotation_deg.push_back((delta - Eigen::Vector3d(0.0, step_rot_deg, 0.0)).norm());
        const double moved_cm = 100.0 * (poses[i + 1].t - poses[i].t).norm();
        out.translation_cm.push_back(std::abs(moved_cm - step_trans_cm));
    }
    return out;
}

Plane fit_plane(std::span<const Eigen::Vector3d> points) {
    if (points.size() < 10) {
        throw Error(ErrorCode::IllConditionedPlane, "plane fitting needs at least 10 points");
    }
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto &p : points) {
        centroid += p;
    }
    centroid /= static_cast<double>(points.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto &p : points) {
        cov += (p - centroid) * (p - centroid).transpose();
    }
    cov /= static_cast<double>(points.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d ev = eig.eigenvalues();
    if (!(ev(1) > 100.0 * std::max(ev(0), 0.0))) {
        throw Error(ErrorCode::IllConditionedPlane, "point set is not well spread over a plane");
    }
    Plane plane;
    plane.normal = eig.eigenvectors().col(0).normalized();
    plane.offset = plane.normal.dot(centroid);
    if (plane.offset < 0.0) {
        plane.normal = -plane.normal;
        plane.offset = -plane.offset;
    }
    return plane;
}

PlaneMergeMetrics plane_merge_metrics(const PlaneMergeInput &input, const Extrinsics &T, double square_mm) {
    std::vector<Eigen::Vector3d> moved;
    moved.reserve(input.source_points.size());
    for (const auto &p : input.source_points) {
        moved.push_back(T.apply(p));
    }
    const Plane target = fit_plane(input.target_points);
    const Plane source = fit_plane(moved);

    PlaneMergeMetrics out;
    out.d_mm = 1000.0 * std::abs(target.offset - source.offset);
    const double cross = target.normal.cross(source.normal).norm();
    const double dot = std::abs(target.normal.dot(source.normal));
    out.theta_deg = std::atan2(cross, dot) * kRadToDeg;

    if (input.squares_per_row && *input.squares_per_row > 0) {
        double sum = 0.0;
        int count = 0;
        if (input.target_corners) {
            sum += 1000.0 * ((*input.target_corners)[1] - (*input.target_corners)[0]).norm();
            ++count;
        }
        if (input.source_corners) {
            const Eigen::Vector3d a = T.apply((*input.source_corners)[0]);
            const Eigen::Vector3d b = T.apply((*input.source_corners)[1]);
            sum += 1000.0 * (b - a).norm();
            ++count;
        }
        if (count > 0) {
            out.l_mm = sum / count / *input.squares_per_row - square_mm;
        }
    }
    return out;
}

} // namespace pelical
