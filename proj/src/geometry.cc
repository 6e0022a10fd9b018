#include "pelical/geometry.h"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <string>

namespace pelical {

const char *to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::NearSingularRotation: return "NearSingularRotation";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::DegenerateTranslation: return "DegenerateTranslation";
    case ErrorCode::NoRealSolution: return "NoRealSolution";
    case ErrorCode::ParallelPlanes: return "ParallelPlanes";
    case ErrorCode::ParallelLines: return "ParallelLines";
    case ErrorCode::InsufficientLines: return "InsufficientLines";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::IllConditionedPlane: return "IllConditionedPlane";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "focal lengths must be positive");
    }
    if (width <= 0 || height <= 0 || !(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw Error(ErrorCode::InvalidInput, "principal point must lie inside the image");
    }
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
    Eigen::Matrix3d K;
    K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return K;
}

Eigen::Vector2d CameraIntrinsics::project(const Eigen::Vector3d &X) const {
    return {fx * X.x() / X.z() + cx, fy * X.y() / X.z() + cy};
}

Eigen::Vector3d CameraIntrinsics::unproject(const Eigen::Vector2d &x) const {
    return {(x.x() - cx) / fx, (x.y() - cy) / fy, 1.0};
}

bool CameraIntrinsics::contains(const Eigen::Vector2d &x, double margin) const {
    return x.x() >= margin && x.y() >= margin && x.x() <= width - 1 - margin && x.y() <= height - 1 - margin;
}

bool PluckerLine::is_valid(double tol) const {
    return d.allFinite() && m.allFinite() && std::abs(d.norm() - 1.0) <= tol && std::abs(d.dot(m)) <= tol;
}

double PluckerLine::distance_to(const Eigen::Vector3d &X) const {
    // |X x d - m| is the distance for unit d.
    return (X.cross(d) - m).norm();
}

Line2D Line2D::from_endpoints(const Eigen::Vector2d &x1, const Eigen::Vector2d &x2) {
    const Eigen::Vector3d l = x1.homogeneous().cross(x2.homogeneous());
    const double n = l.head<2>().norm();
    if (!(n > 1e-9)) {
        throw Error(ErrorCode::DegenerateLine, "2D segment endpoints coincide");
    }
    Line2D out;
    out.coeffs = l / n;
    out.endpoints = {x1, x2};
    return out;
}

bool Extrinsics::is_valid(double tol) const {
    if (!R.allFinite() || !t.allFinite()) {
        return false;
    }
    const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
    Eigen::Matrix3d S;
    S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return S;
}

PluckerLine plucker_from_points(const Eigen::Vector3d &p1, const Eigen::Vector3d &p2) {
    const Eigen::Vector3d delta = p2 - p1;
    const double len = delta.norm();
    if (!(len > 1e-6)) {
        throw Error(ErrorCode::DegenerateLine, "line endpoints coincide");
    }
    PluckerLine L;
    L.d = delta / len;
    L.m = p1.cross(L.d);
    return L;
}

PluckerLine transform_line(const PluckerLine &L, const Extrinsics &T) {
    PluckerLine out;
    out.d = T.R * L.d;
    out.m = T.R * L.m + T.t.cross(out.d);
    return out;
}

Eigen::Matrix4d dual_plucker_matrix(const PluckerLine &L) {
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    M.topLeftCorner<3, 3>() = -skew(L.d);
    M.topRightCorner<3, 1>() = -L.m;
    M.bottomLeftCorner<1, 3>() = L.m.transpose();
    return M;
}

Eigen::Matrix3d cgr_to_scaled_rotation(const Eigen::Vector3d &s) {
    const double ss = s.squaredNorm();
    return (1.0 - ss) * Eigen::Matrix3d::Identity() + 2.0 * skew(s) + 2.0 * s * s.transpose();
}

Eigen::Matrix3d cgr_to_rotation(const Eigen::Vector3d &s) { return cgr_to_scaled_rotation(s) / (1.0 + s.squaredNorm()); }

Eigen::Vector3d rotation_to_cgr(const Eigen::Matrix3d &R) {
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0.0) {
        q.coeffs() = -q.coeffs();
    }
    const double angle = 2.0 * std::atan2(q.vec().norm(), q.w());
    if (angle >= std::numbers::pi - 1e-3) {
        throw Error(ErrorCode::NearSingularRotation, "rotation angle too close to 180 degrees for CGR");
    }
    return q.vec() / q.w();
}

Eigen::Matrix3d line_projection_matrix(const CameraIntrinsics &K) {
    Eigen::Matrix3d P;
    P << K.fy, 0.0, 0.0, 0.0, K.fx, 0.0, -K.fy * K.cx, -K.fx * K.cy, K.fx * K.fy;
    return P;
}

SO3Projection project_so3(const Eigen::Matrix3d &M) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sigma = svd.singularValues();
    if (sigma(1) <= 1e-12 && sigma(2) <= 1e-12) {
        throw Error(ErrorCode::RankDeficient, "SO(3) projection is not unique");
    }
    const Eigen::Matrix3d &U = svd.matrixU();
    const Eigen::Matrix3d &V = svd.matrixV();
    const Eigen::Vector3d sigma_prime(1.0, 1.0, (U * V.transpose()).determinant() > 0.0 ? 1.0 : -1.0);
    return {U * sigma_prime.asDiagonal() * V.transpose(), sigma, sigma_prime};
}

double so3_distance(const Eigen::Vector3d &sigma, const Eigen::Vector3d &sigma_prime) {
    return (sigma - sigma_prime).norm();
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d &w) {
    const double theta = w.norm();
    if (theta < 1e-12) {
        return orthonormalize(Eigen::Matrix3d::Identity() + skew(w));
    }
    return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d &R) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0.0) {
        Eigen::Matrix3d U = svd.matrixU();
        U.col(2) *= -1.0;
        out = U * svd.matrixV().transpose();
    }
    return out;
}

double rotation_angle_deg(const Eigen::Matrix3d &R) {
    // atan2 form stays accurate for tiny angles where acos((tr - 1) / 2) loses digits.
    const Eigen::Vector3d axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    const double angle = std::atan2(0.5 * axis.norm(), 0.5 * (R.trace() - 1.0));
    return angle * 180.0 / std::numbers::pi;
}

double rotation_error_deg(const Eigen::Matrix3d &A, const Eigen::Matrix3d &B) {
    return rotation_angle_deg(A.transpose() * B);
}

} // namespace pelical
