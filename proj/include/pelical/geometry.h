#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

#include "pelical/error.h"

namespace pelical {

// Pinhole intrinsics of a rectified camera.
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    // Throws InvalidInput when the focal lengths or principal point are out of range.
    void validate() const;
    Eigen::Matrix3d matrix() const;
    Eigen::Vector2d project(const Eigen::Vector3d &X) const;
    // Unit-depth viewing ray through pixel x.
    Eigen::Vector3d unproject(const Eigen::Vector2d &x) const;
    bool contains(const Eigen::Vector2d &x, double margin = 0.0) const;
};

// A 3D line as unit direction d and moment m = p x d.
struct PluckerLine {
    Eigen::Vector3d d = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d m = Eigen::Vector3d::Zero();

    bool is_valid(double tol = 1e-9) const;
    // Point on the line closest to the origin.
    Eigen::Vector3d closest_point_to_origin() const { return d.cross(m); }
    double distance_to(const Eigen::Vector3d &X) const;
    PluckerLine flipped() const { return {-d, -m}; }
};

// Image line l with sqrt(l1^2 + l2^2) = 1 and the two segment endpoints it was built from.
struct Line2D {
    Eigen::Vector3d coeffs = Eigen::Vector3d::UnitZ();
    std::array<Eigen::Vector2d, 2> endpoints{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};

    // Throws DegenerateLine when the endpoints coincide.
    static Line2D from_endpoints(const Eigen::Vector2d &x1, const Eigen::Vector2d &x2);
    double signed_distance(const Eigen::Vector2d &x) const { return coeffs.dot(x.homogeneous()); }
};

// Rigid transform mapping source-camera coordinates into the target camera: X_t = R X_s + t.
struct Extrinsics {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();

    static Extrinsics identity() { return {}; }
    Extrinsics inverse() const { return {R.transpose(), -R.transpose() * t}; }
    Eigen::Vector3d apply(const Eigen::Vector3d &X) const { return R * X + t; }
    bool is_valid(double tol = 1e-9) const;
};

Eigen::Matrix3d skew(const Eigen::Vector3d &v);

PluckerLine plucker_from_points(const Eigen::Vector3d &p1, const Eigen::Vector3d &p2);
PluckerLine transform_line(const PluckerLine &L, const Extrinsics &T);

// [[-d^, -m], [m^T, 0]] for m = p x d: antisymmetric, and annihilates the homogeneous coordinates of
// every point on L.
Eigen::Matrix4d dual_plucker_matrix(const PluckerLine &L);

// Cayley-Gibbs-Rodrigues parameters s = tan(theta/2) * axis.
Eigen::Matrix3d cgr_to_rotation(const Eigen::Vector3d &s);
// Unnormalized rotation (1 - s's) I + 2 [s]x + 2 s s', equal to (1 + s's) R.
Eigen::Matrix3d cgr_to_scaled_rotation(const Eigen::Vector3d &s);
Eigen::Vector3d rotation_to_cgr(const Eigen::Matrix3d &R);

// Maps the moment of a camera-frame line to its homogeneous image line.
Eigen::Matrix3d line_projection_matrix(const CameraIntrinsics &K);

struct SO3Projection {
    Eigen::Matrix3d R;
    Eigen::Vector3d sigma;
    Eigen::Vector3d sigma_prime;
};

SO3Projection project_so3(const Eigen::Matrix3d &M);
double so3_distance(const Eigen::Vector3d &sigma, const Eigen::Vector3d &sigma_prime);

Eigen::Matrix3d so3_exp(const Eigen::Vector3d &w);
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d &R);
double rotation_angle_deg(const Eigen::Matrix3d &R);
double rotation_error_deg(const Eigen::Matrix3d &A, const Eigen::Matrix3d &B);

} // namespace pelical
