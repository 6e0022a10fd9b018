#pragma once

// Fixture generators and brute-force oracles shared by the unit and acceptance tests. Nothing here calls
// into the solver or selection code; the geometry is rebuilt from first principles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pelical/constraints.h"
#include "pelical/geometry.h"

namespace pelical::testing {

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d &axis, double angle_rad) {
    return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

inline Eigen::Vector3d random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector3d v;
    do {
        v = Eigen::Vector3d(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64 &rng, double max_angle_deg) {
    std::uniform_real_distribution<double> a(0.0, max_angle_deg * kDeg);
    return axis_angle(random_unit(rng), a(rng));
}

inline Extrinsics random_extrinsics(std::mt19937_64 &rng, double max_angle_deg, double max_t) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Vector3d t;
    do {
        t = Eigen::Vector3d(u(rng), u(rng), u(rng));
    } while (t.norm() > 1.0);
    return {random_rotation(rng, max_angle_deg), max_t * t};
}

inline CameraIntrinsics test_camera() {
    CameraIntrinsics K;
    K.fx = 600.0;
    K.fy = 610.0;
    K.cx = 320.0;
    K.cy = 240.0;
    K.width = 640;
    K.height = 480;
    return K;
}

inline Eigen::Vector2d pinhole(const CameraIntrinsics &K, const Eigen::Vector3d &X) {
    return {K.fx * X.x() / X.z() + K.cx, K.fy * X.y() / X.z() + K.cy};
}

// Homogeneous image line through two pixels, normalised so that l1^2 + l2^2 = 1.
inline Eigen::Vector3d line_through(const Eigen::Vector2d &a, const Eigen::Vector2d &b) {
    Eigen::Vector3d l = a.homogeneous().cross(b.homogeneous());
    return l / l.head<2>().norm();
}

// A consistent pair built in the target frame: two points in front of the target camera, mapped back
// into the source frame with the inverse of T.
inline Correspondence make_pair(std::mt19937_64 &rng, const Extrinsics &T, const CameraIntrinsics &K, CaseKind kind,
                                int id = 0) {
    std::uniform_real_distribution<double> px(40.0, 600.0), py(40.0, 440.0), depth(1.0, 4.0);
    Eigen::Vector3d Xt1, Xt2;
    do {
        const Eigen::Vector2d a(px(rng), py(rng)), b(px(rng), py(rng));
        const double z1 = depth(rng), z2 = depth(rng);
        Xt1 = Eigen::Vector3d((a.x() - K.cx) / K.fx, (a.y() - K.cy) / K.fy, 1.0) * z1;
        Xt2 = Eigen::Vector3d((b.x() - K.cx) / K.fx, (b.y() - K.cy) / K.fy, 1.0) * z2;
    } while ((Xt2 - Xt1).norm() < 0.3 || (pinhole(K, Xt1) - pinhole(K, Xt2)).norm() < 30.0);

    const Eigen::Matrix3d Rt = T.R.transpose();
    const Eigen::Vector3d Xs1 = Rt * (Xt1 - T.t);
    const Eigen::Vector3d Xs2 = Rt * (Xt2 - T.t);
    Correspondence c;
    c.id = id;
    c.kind = kind;
    c.source_line.d = (Xs2 - Xs1).normalized();
    c.source_line.m = Xs1.cross(c.source_line.d);
    c.source_endpoints = {Xs1, Xs2};
    c.source_inlier_ratio = 1.0;
    // Target 2D segment: the projection of a slightly different stretch of the same line.
    const Eigen::Vector3d dt = (Xt2 - Xt1).normalized();
    const Eigen::Vector3d Yt1 = Xt1 + 0.05 * dt;
    const Eigen::Vector3d Yt2 = Xt2 - 0.05 * dt;
    c.target_line_2d.endpoints = {pinhole(K, Yt1), pinhole(K, Yt2)};
    c.target_line_2d.coeffs = line_through(c.target_line_2d.endpoints[0], c.target_line_2d.endpoints[1]);
    if (kind == CaseKind::Full3D) {
        TargetLine3D tl;
        tl.line.d = dt;
        tl.line.m = Yt1.cross(dt);
        tl.endpoints = {Yt1, Yt2};
        c.target_3d = tl;
        c.target_inlier_ratio = 1.0;
    } else {
        c.target_inlier_ratio = 0.0;
    }
    return c;
}

inline std::vector<Correspondence> make_pairs(std::mt19937_64 &rng, const Extrinsics &T, const CameraIntrinsics &K,
                                              int n_full3d, int n_pnl) {
    std::vector<Correspondence> out;
    for (int i = 0; i < n_full3d; ++i) {
        out.push_back(make_pair(rng, T, K, CaseKind::Full3D, static_cast<int>(out.size())));
    }
    for (int i = 0; i < n_pnl; ++i) {
        out.push_back(make_pair(rng, T, K, CaseKind::PnL, static_cast<int>(out.size())));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------------
// Grid + Newton oracle for min_s ||A r(s) + B tau||^2 with tau eliminated by least squares.

struct OracleMinimum {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    double value = 0.0;
};

struct QuarticObjective {
    Eigen::Matrix<double, 10, 10> Q; // A' (I - P_B) A

    explicit QuarticObjective(const QuadraticSystem &sys) {
        const Eigen::MatrixXd B = sys.B;
        const Eigen::MatrixXd A = sys.A;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
        const Eigen::MatrixXd Qb = qr.householderQ() * Eigen::MatrixXd::Identity(B.rows(), 3);
        const Eigen::MatrixXd PA = A - Qb * (Qb.transpose() * A);
        Q = PA.transpose() * PA;
    }

    static Eigen::Matrix<double, 10, 1> mono(const Eigen::Vector3d &s) {
        Eigen::Matrix<double, 10, 1> r;
        r << s(0) * s(0), s(1) * s(1), s(2) * s(2), s(0) * s(1), s(0) * s(2), s(1) * s(2), s(0), s(1), s(2), 1.0;
        return r;
    }

    static Eigen::Matrix<double, 10, 3> mono_jac(const Eigen::Vector3d &s) {
        Eigen::Matrix<double, 10, 3> J = Eigen::Matrix<double, 10, 3>::Zero();
        J(0, 0) = 2 * s(0);
        J(1, 1) = 2 * s(1);
        J(2, 2) = 2 * s(2);
        J(3, 0) = s(1), J(3, 1) = s(0);
        J(4, 0) = s(2), J(4, 2) = s(0);
        J(5, 1) = s(2), J(5, 2) = s(1);
        J(6, 0) = 1;
        J(7, 1) = 1;
        J(8, 2) = 1;
        return J;
    }

    double value(const Eigen::Vector3d &s) const {
        const auto r = mono(s);
        return r.dot(Q * r);
    }

    void derivatives(const Eigen::Vector3d &s, Eigen::Vector3d &g, Eigen::Matrix3d &H) const {
        const auto r = mono(s);
        const auto J = mono_jac(s);
        const Eigen::Matrix<double, 10, 1> Qr = Q * r;
        g = 2.0 * J.transpose() * Qr;
        H = 2.0 * J.transpose() * Q * J;
        // Second derivatives of the monomials are constant.
        H(0, 0) += 2.0 * 2.0 * Qr(0);
        H(1, 1) += 2.0 * 2.0 * Qr(1);
        H(2, 2) += 2.0 * 2.0 * Qr(2);
        H(0, 1) += 2.0 * Qr(3), H(1, 0) += 2.0 * Qr(3);
        H(0, 2) += 2.0 * Qr(4), H(2, 0) += 2.0 * Qr(4);
        H(1, 2) += 2.0 * Qr(5), H(2, 1) += 2.0 * Qr(5);
    }

    Eigen::Vector3d polish(Eigen::Vector3d s) const {
        for (int it = 0; it < 100; ++it) {
            Eigen::Vector3d g;
            Eigen::Matrix3d H;
            derivatives(s, g, H);
            Eigen::Vector3d step = H.ldlt().solve(-g);
            if (!step.allFinite() || step.dot(g) >= 0.0) {
                step = -g * 1e-3;
            }
            double f0 = value(s), alpha = 1.0;
            while (alpha > 1e-12 && value(s + alpha * step) > f0) {
                alpha *= 0.5;
            }
            if (alpha <= 1e-12) {
                break;
            }
            s += alpha * step;
            if ((alpha * step).norm() < 1e-15) {
                break;
            }
        }
        return s;
    }
};

// Scans the grid, polishes every discrete local minimum and returns the best distinct minima (lowest value
// first, ties by smaller |s|).
inline std::vector<OracleMinimum> grid_newton_oracle(const QuadraticSystem &sys, double halfwidth, double step) {
    const QuarticObjective f(sys);
    const int n = static_cast<int>(std::lround(2.0 * halfwidth / step)) + 1;
    std::vector<double> grid(static_cast<size_t>(n) * n * n);
    const auto at = [&](int i, int j, int k) -> double & { return grid[(static_cast<size_t>(i) * n + j) * n + k]; };
    const auto coord = [&](int i) { return -halfwidth + step * i; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                at(i, j, k) = f.value(Eigen::Vector3d(coord(i), coord(j), coord(k)));
            }
        }
    }
    std::vector<OracleMinimum> minima;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                const double v = at(i, j, k);
                bool is_min = true;
                for (int di = -1; di <= 1 && is_min; ++di) {
                    for (int dj = -1; dj <= 1 && is_min; ++dj) {
                        for (int dk = -1; dk <= 1 && is_min; ++dk) {
                            const int a = i + di, b = j + dj, c = k + dk;
                            if ((di || dj || dk) && a >= 0 && b >= 0 && c >= 0 && a < n && b < n && c < n &&
                                at(a, b, c) < v) {
                                is_min = false;
                            }
                        }
                    }
                }
                if (!is_min) {
                    continue;
                }
                const Eigen::Vector3d s = f.polish(Eigen::Vector3d(coord(i), coord(j), coord(k)));
                const double val = f.value(s);
                const bool dup = std::any_of(minima.begin(), minima.end(),
                                             [&](const OracleMinimum &m) { return (m.s - s).norm() < 1e-6; });
                if (!dup && s.cwiseAbs().maxCoeff() <= halfwidth + 1e-9) {
                    minima.push_back({s, val});
                }
            }
        }
    }
    std::sort(minima.begin(), minima.end(), [](const OracleMinimum &a, const OracleMinimum &b) {
        if (std::abs(a.value - b.value) > 1e-12 * std::max(1.0, std::max(a.value, b.value))) {
            return a.value < b.value;
        }
        return a.s.norm() < b.s.norm();
    });
    return minima;
}

// Central differences of a residual function with respect to (w, dt), R <- exp([w]x) R.
template <int Rows, typename F>
Eigen::Matrix<double, Rows, 6> numeric_jacobian(const Extrinsics &T, F residual, double h = 1e-6) {
    Eigen::Matrix<double, Rows, 6> J;
    for (int k = 0; k < 6; ++k) {
        Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
        delta(k) = h;
        const auto perturbed = [&](double sign) {
            Extrinsics P = T;
            const Eigen::Vector3d w = sign * delta.head<3>();
            P.R = Eigen::AngleAxisd(w.norm(), w.norm() > 0 ? Eigen::Vector3d(w.normalized()) : Eigen::Vector3d::UnitX())
                      .toRotationMatrix() *
                  T.R;
            P.t = T.t + sign * delta.tail<3>();
            return residual(P);
        };
        J.col(k) = (perturbed(1.0) - perturbed(-1.0)) / (2.0 * h);
    }
    return J;
}

} // namespace pelical::testing
