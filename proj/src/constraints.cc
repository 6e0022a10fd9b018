#include "pelical/constraints.h"

#include <string>

namespace pelical {

const char *to_string(CaseKind kind) { return kind == CaseKind::Full3D ? "Full3D" : "PnL"; }

const char *to_string(Classification c) {
    switch (c) {
    case Classification::Full3D: return "Full3D";
    case Classification::PnL: return "PnL";
    case Classification::Reject: return "Reject";
    }
    return "Reject";
}

Classification classify(double source_ratio, double target_ratio, double threshold) {
    if (source_ratio < threshold) {
        return Classification::Reject;
    }
    return target_ratio >= threshold ? Classification::Full3D : Classification::PnL;
}

Monomials cgr_monomials(const Eigen::Vector3d &s) {
    Monomials r;
    r << s(0) * s(0), s(1) * s(1), s(2) * s(2), s(0) * s(1), s(0) * s(2), s(1) * s(2), s(0), s(1), s(2), 1.0;
    return r;
}

Eigen::Matrix<double, 10, 3> cgr_monomials_jacobian(const Eigen::Vector3d &s) {
    Eigen::Matrix<double, 10, 3> J = Eigen::Matrix<double, 10, 3>::Zero();
    J(0, 0) = 2.0 * s(0);
    J(1, 1) = 2.0 * s(1);
    J(2, 2) = 2.0 * s(2);
    J(3, 0) = s(1);
    J(3, 1) = s(0);
    J(4, 0) = s(2);
    J(4, 2) = s(0);
    J(5, 1) = s(2);
    J(5, 2) = s(1);
    J(6, 0) = 1.0;
    J(7, 1) = 1.0;
    J(8, 2) = 1.0;
    return J;
}

Eigen::Matrix<double, 3, 10> scaled_rotation_action(const Eigen::Vector3d &X) {
    const double x = X(0), y = X(1), z = X(2);
    Eigen::Matrix<double, 3, 10> W;
    // clang-format off
    //     s1^2 s2^2 s3^2 s1s2    s1s3    s2s3    s1      s2      s3      1
    W <<   x,   -x,  -x,  2 * y,  2 * z,  0.0,    0.0,    2 * z,  -2 * y, x,
           -y,  y,   -y,  2 * x,  0.0,    2 * z,  -2 * z, 0.0,    2 * x,  y,
           -z,  -z,  z,   0.0,    2 * x,  2 * y,  2 * y,  -2 * x, 0.0,    z;
    // clang-format on
    return W;
}

double QuadraticSystem::residual(const Eigen::Vector3d &s, const Eigen::Vector3d &tau) const {
    return (A * cgr_monomials(s) + B * tau).norm();
}

ConstraintRows full3d_rows(const Correspondence &c) {
    if (c.kind != CaseKind::Full3D || !c.target_3d) {
        throw Error(ErrorCode::WrongKind, "full3d_rows requires a Full3D correspondence");
    }
    const Eigen::Vector3d &d_t = c.target_3d->line.d;
    const Eigen::Vector3d &m_t = c.target_3d->line.m;
    const Eigen::Matrix3d neg_dt_hat = -skew(d_t);

    // (1 + s's) as a row over the monomials.
    Eigen::Matrix<double, 1, 10> scale = Eigen::Matrix<double, 1, 10>::Zero();
    scale(0) = scale(1) = scale(2) = scale(9) = 1.0;

    ConstraintRows out;
    out.A.resize(8, 10);
    out.B.resize(8, 3);
    for (int j = 0; j < 2; ++j) {
        const Eigen::Matrix<double, 3, 10> W = scaled_rotation_action(c.source_endpoints[j]);
        out.A.middleRows<3>(4 * j) = neg_dt_hat * W - m_t * scale;
        out.A.row(4 * j + 3) = m_t.transpose() * W;
        out.B.middleRows<3>(4 * j) = neg_dt_hat;
        out.B.row(4 * j + 3) = m_t.transpose();
    }
    return out;
}

ConstraintRows pnl_rows(const Correspondence &c, const CameraIntrinsics &K_t) {
    if (c.kind != CaseKind::PnL) {
        throw Error(ErrorCode::WrongKind, "pnl_rows requires a PnL correspondence");
    }
    const Eigen::Vector3d normal = K_t.matrix().transpose() * c.target_line_2d.coeffs;
    ConstraintRows out;
    out.A.resize(2, 10);
    out.B.resize(2, 3);
    for (int j = 0; j < 2; ++j) {
        out.A.row(j) = normal.transpose() * scaled_rotation_action(c.source_endpoints[j]);
        out.B.row(j) = normal.transpose();
    }
    return out;
}

QuadraticSystem assemble(std::span<const Correspondence> cs, const CameraIntrinsics &K_t) {
    if (cs.empty()) {
        throw Error(ErrorCode::EmptyInput, "cannot assemble a quadratic system without correspondences");
    }
    QuadraticSystem sys;
    for (const Correspondence &c : cs) {
        (c.kind == CaseKind::Full3D ? sys.num_full3d : sys.num_pnl) += 1;
    }
    const Eigen::Index rows = 8 * sys.num_full3d + 2 * sys.num_pnl;
    sys.A.resize(rows, 10);
    sys.B.resize(rows, 3);
    Eigen::Index row = 0;
    for (const Correspondence &c : cs) {
        const ConstraintRows block = c.kind == CaseKind::Full3D ? full3d_rows(c) : pnl_rows(c, K_t);
        sys.A.middleRows(row, block.A.rows()) = block.A;
        sys.B.middleRows(row, block.B.rows()) = block.B;
        row += block.A.rows();
    }
    return sys;
}

namespace {

Eigen::Vector3d projected_line(const Correspondence &c, const Extrinsics &T, const CameraIntrinsics &K_t) {
    return line_projection_matrix(K_t) * transform_line(c.source_line, T).m;
}

} // namespace

Eigen::Vector2d line_reprojection_residual(const Correspondence &c, const Extrinsics &T, const CameraIntrinsics &K_t) {
    const Eigen::Vector3d l = projected_line(c, T, K_t);
    const double n2 = l.head<2>().squaredNorm();
    if (n2 < 1e-18) {
        throw Error(ErrorCode::DegenerateProjection, "projected source line degenerates to a point");
    }
    const double inv = 1.0 / std::sqrt(n2);
    return {c.target_line_2d.endpoints[0].homogeneous().dot(l) * inv,
            c.target_line_2d.endpoints[1].homogeneous().dot(l) * inv};
}

std::array<Eigen::Vector3d, 2> point_to_line_residual(const Correspondence &c, const Extrinsics &T) {
    if (c.kind != CaseKind::Full3D || !c.target_3d) {
        throw Error(ErrorCode::WrongKind, "point-to-line residual requires a Full3D correspondence");
    }
    const Eigen::Vector3d &d_t = c.target_3d->line.d;
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - d_t * d_t.transpose();
    return {P * (T.apply(c.source_endpoints[0]) - c.target_3d->endpoints[0]),
            P * (T.apply(c.source_endpoints[1]) - c.target_3d->endpoints[1])};
}

ResidualBlock residual_block(const Correspondence &c, const Extrinsics &T, const CameraIntrinsics &K_t) {
    ResidualBlock block;
    if (c.kind == CaseKind::Full3D) {
        const auto e = point_to_line_residual(c, T);
        block.kind = ResidualKind::PointToLine;
        block.values.resize(6);
        block.values << e[0], e[1];
    } else {
        block.kind = ResidualKind::LineReprojection;
        block.values = line_reprojection_residual(c, T, K_t);
    }
    return block;
}

Eigen::Matrix<double, 2, 6> line_reprojection_jacobian(const Correspondence &c, const Extrinsics &T,
                                                      const CameraIntrinsics &K_t) {
    const Eigen::Matrix3d Kl = line_projection_matrix(K_t);
    const Eigen::Vector3d Rm = T.R * c.source_line.m;
    const Eigen::Vector3d u = T.R * c.source_line.d;
    const Eigen::Vector3d l = Kl * (Rm + T.t.cross(u));
    const double n2 = l.head<2>().squaredNorm();
    if (n2 < 1e-18) {
        throw Error(ErrorCode::DegenerateProjection, "projected source line degenerates to a point");
    }
    const double n = std::sqrt(n2);

    // d m' / d(w, dt)
    Eigen::Matrix<double, 3, 6> dm;
    dm.leftCols<3>() = -skew(Rm) - skew(T.t) * skew(u);
    dm.rightCols<3>() = -skew(u);
    const Eigen::Matrix<double, 3, 6> dl = Kl * dm;

    Eigen::Matrix<double, 2, 6> J;
    for (int j = 0; j < 2; ++j) {
        const Eigen::Vector3d x = c.target_line_2d.endpoints[j].homogeneous();
        const double xl = x.dot(l);
        Eigen::RowVector3d de_dl = x.transpose() / n;
        de_dl(0) -= xl * l(0) / (n2 * n);
        de_dl(1) -= xl * l(1) / (n2 * n);
        J.row(j) = de_dl * dl;
    }
    return J;
}

Eigen::Matrix<double, 6, 6> point_to_line_jacobian(const Correspondence &c, const Extrinsics &T) {
    if (c.kind != CaseKind::Full3D || !c.target_3d) {
        throw Error(ErrorCode::WrongKind, "point-to-line residual requires a Full3D correspondence");
    }
    const Eigen::Vector3d &d_t = c.target_3d->line.d;
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - d_t * d_t.transpose();
    Eigen::Matrix<double, 6, 6> J;
    for (int j = 0; j < 2; ++j) {
        J.block<3, 3>(3 * j, 0) = -P * skew(T.R * c.source_endpoints[j]);
        J.block<3, 3>(3 * j, 3) = P;
    }
    return J;
}

} // namespace pelical
