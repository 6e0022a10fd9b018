#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "pelical/geometry.h"

namespace pelical {

enum class CaseKind { Full3D, PnL };
enum class Classification { Full3D, PnL, Reject };

const char *to_string(CaseKind kind);
const char *to_string(Classification c);

// Full3D when both lines fit well, PnL when only the source line does.
Classification classify(double source_ratio, double target_ratio, double threshold);

// RANSAC-fitted target 3D line with its extremal inlier projections.
struct TargetLine3D {
    PluckerLine line;
    std::array<Eigen::Vector3d, 2> endpoints;
};

struct Correspondence {
    int id = -1;
    CaseKind kind = CaseKind::PnL;
    PluckerLine source_line;
    std::array<Eigen::Vector3d, 2> source_endpoints{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    std::optional<TargetLine3D> target_3d; // present iff kind == Full3D
    Line2D target_line_2d;
    double source_inlier_ratio = 1.0;
    double target_inlier_ratio = 0.0;
};

// Monomials of the CGR parameters in the fixed order
// [s1^2, s2^2, s3^2, s1 s2, s1 s3, s2 s3, s1, s2, s3, 1].
using Monomials = Eigen::Matrix<double, 10, 1>;
Monomials cgr_monomials(const Eigen::Vector3d &s);
// d r / d s, one column per CGR parameter.
Eigen::Matrix<double, 10, 3> cgr_monomials_jacobian(const Eigen::Vector3d &s);
// Linear map W with W r(s) = Rbar(s) X.
Eigen::Matrix<double, 3, 10> scaled_rotation_action(const Eigen::Vector3d &X);

using RowMatrixA = Eigen::Matrix<double, Eigen::Dynamic, 10>;
using RowMatrixB = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct ConstraintRows {
    RowMatrixA A;
    RowMatrixB B;
};

// A r + B tau = 0 with tau = (1 + s's) t.
struct QuadraticSystem {
    RowMatrixA A;
    RowMatrixB B;
    int num_full3d = 0;
    int num_pnl = 0;

    Eigen::Index rows() const { return A.rows(); }
    // ||A r(s) + B tau||_2
    double residual(const Eigen::Vector3d &s, const Eigen::Vector3d &tau) const;
};

ConstraintRows full3d_rows(const Correspondence &c);
ConstraintRows pnl_rows(const Correspondence &c, const CameraIntrinsics &K_t);
QuadraticSystem assemble(std::span<const Correspondence> cs, const CameraIntrinsics &K_t);

enum class ResidualKind { LineReprojection, PointToLine };

struct ResidualBlock {
    ResidualKind kind = ResidualKind::LineReprojection;
    Eigen::VectorXd values; // 2 entries (px) or 6 entries (m, endpoint-major)
};

Eigen::Vector2d line_reprojection_residual(const Correspondence &c, const Extrinsics &T, const CameraIntrinsics &K_t);
std::array<Eigen::Vector3d, 2> point_to_line_residual(const Correspondence &c, const Extrinsics &T);
ResidualBlock residual_block(const Correspondence &c, const Extrinsics &T, const CameraIntrinsics &K_t);

// Jacobians with respect to (w, dt) under the update R <- exp([w]x) R, t <- t + dt.
Eigen::Matrix<double, 2, 6> line_reprojection_jacobian(const Correspondence &c, const Extrinsics &T,
                                                      const CameraIntrinsics &K_t);
Eigen::Matrix<double, 6, 6> point_to_line_jacobian(const Correspondence &c, const Extrinsics &T);

} // namespace pelical
