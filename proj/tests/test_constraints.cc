#include "test_support.h"

#include <gtest/gtest.h>

using namespace pelical;
using namespace pelical::testing;

namespace {

Eigen::VectorXd row_residual(const ConstraintRows &rows, const Extrinsics &T) {
    const Eigen::Vector3d s = rotation_to_cgr(T.R);
    return rows.A * cgr_monomials(s) + rows.B * ((1.0 + s.squaredNorm()) * T.t);
}

// Pair whose source and target coincide (identity rig), built by hand.
Correspondence identity_pair(CaseKind kind) {
    const Eigen::Vector3d a(-0.5, 0.2, 2.0), b(0.4, -0.1, 3.0);
    Correspondence c;
    c.kind = kind;
    c.source_line = plucker_from_points(a, b);
    c.source_endpoints = {a, b};
    const CameraIntrinsics K = test_camera();
    c.target_line_2d.endpoints = {pinhole(K, a), pinhole(K, b)};
    c.target_line_2d.coeffs = line_through(pinhole(K, a), pinhole(K, b));
    if (kind == CaseKind::Full3D) {
        c.target_3d = TargetLine3D{c.source_line, {a, b}};
    }
    return c;
}

} // namespace

TEST(Classify, Rule) {
    EXPECT_EQ(classify(0.9, 0.9, 0.8), Classification::Full3D);
    EXPECT_EQ(classify(0.9, 0.3, 0.8), Classification::PnL);
    EXPECT_EQ(classify(0.3, 0.9, 0.8), Classification::Reject);
    EXPECT_EQ(classify(0.8, 0.8, 0.8), Classification::Full3D);
}

TEST(Monomials, OrderAndJacobian) {
    const Eigen::Vector3d s(0.3, -0.7, 1.1);
    Monomials expected;
    expected << 0.09, 0.49, 1.21, -0.21, 0.33, -0.77, 0.3, -0.7, 1.1, 1.0;
    EXPECT_LT((cgr_monomials(s) - expected).norm(), 1e-15);

    const double h = 1e-6;
    const Eigen::Matrix<double, 10, 3> J = cgr_monomials_jacobian(s);
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d e = Eigen::Vector3d::Unit(k) * h;
        EXPECT_LT((J.col(k) - (cgr_monomials(s + e) - cgr_monomials(s - e)) / (2 * h)).norm(), 1e-9);
    }
}

TEST(Monomials, ScaledRotationAction) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d s = 3.0 * random_unit(rng) * std::uniform_real_distribution<double>(0, 1)(rng);
        const Eigen::Vector3d X = 2.0 * random_unit(rng);
        EXPECT_LT((scaled_rotation_action(X) * cgr_monomials(s) - cgr_to_scaled_rotation(s) * X).norm(), 1e-12);
    }
}

TEST(Full3dRows, IdentityTruthIsConsistent) {
    const ConstraintRows rows = full3d_rows(identity_pair(CaseKind::Full3D));
    ASSERT_EQ(rows.A.rows(), 8);
    EXPECT_LT(row_residual(rows, Extrinsics::identity()).norm(), 1e-12);
}

TEST(Full3dRows, VanishAtTruthOnly) {
    std::mt19937_64 rng(12);
    const CameraIntrinsics K = test_camera();
    for (int i = 0; i < 200; ++i) {
        const Extrinsics T = random_extrinsics(rng, 80.0, 0.6);
        Correspondence c = make_pair(rng, T, K, CaseKind::Full3D);
        EXPECT_LT(row_residual(full3d_rows(c), T).norm(), 1e-9);
        c.target_3d->line.m += Eigen::Vector3d::Constant(0.01);
        EXPECT_GT(row_residual(full3d_rows(c), T).norm(), 1e-4);
    }
    EXPECT_THROW(full3d_rows(make_pair(rng, Extrinsics::identity(), K, CaseKind::PnL)), Error);
}

TEST(PnlRows, VanishAtTruthAndScaleLinearly) {
    std::mt19937_64 rng(13);
    const CameraIntrinsics K = test_camera();
    for (int i = 0; i < 200; ++i) {
        const Extrinsics T = random_extrinsics(rng, 80.0, 0.6);
        Correspondence c = make_pair(rng, T, K, CaseKind::PnL);
        const Eigen::VectorXd r = row_residual(pnl_rows(c, K), T);
        EXPECT_LT(r.norm(), 1e-9 * K.fx);
        const Extrinsics off{T.R, T.t + Eigen::Vector3d(0.02, -0.01, 0.0)};
        const Eigen::VectorXd r1 = row_residual(pnl_rows(c, K), off);
        c.target_line_2d.coeffs *= 2.5;
        EXPECT_LT((row_residual(pnl_rows(c, K), off) - 2.5 * r1).norm(), 1e-9 * (1.0 + r1.norm()));
    }
    // An endpoint that lands on the target optical centre still yields finite rows.
    Correspondence c = identity_pair(CaseKind::PnL);
    c.source_endpoints[0].setZero();
    EXPECT_TRUE(pnl_rows(c, K).A.allFinite());
}

TEST(Assemble, Shapes) {
    std::mt19937_64 rng(14);
    const CameraIntrinsics K = test_camera();
    const auto cs = make_pairs(rng, Extrinsics::identity(), K, 2, 3);
    const QuadraticSystem sys = assemble(cs, K);
    EXPECT_EQ(sys.rows(), 22);
    EXPECT_EQ(sys.num_full3d, 2);
    EXPECT_EQ(sys.num_pnl, 3);
    const QuadraticSystem one = assemble(std::span(cs).first(1), K);
    EXPECT_EQ(one.A.rows(), 8);
    EXPECT_EQ(one.B.cols(), 3);
    try {
        assemble({}, K);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
}

TEST(Residuals, LineReprojection) {
    std::mt19937_64 rng(15);
    const CameraIntrinsics K = test_camera();
    const Extrinsics T = random_extrinsics(rng, 40.0, 0.3);
    const Correspondence c = make_pair(rng, T, K, CaseKind::PnL);
    EXPECT_LT(line_reprojection_residual(c, T, K).norm(), 1e-6);

    // Fronto-parallel horizontal line 1 m away; a 1 cm vertical offset moves both endpoints by fy * 0.01 px.
    CameraIntrinsics K5 = K;
    K5.fx = K5.fy = 500;
    Correspondence h = identity_pair(CaseKind::PnL);
    h.source_endpoints = {Eigen::Vector3d(-0.3, 0, 1), Eigen::Vector3d(0.3, 0, 1)};
    h.source_line = plucker_from_points(h.source_endpoints[0], h.source_endpoints[1]);
    h.target_line_2d.endpoints = {pinhole(K5, h.source_endpoints[0]), pinhole(K5, h.source_endpoints[1])};
    const Eigen::Vector2d e = line_reprojection_residual(h, {Eigen::Matrix3d::Identity(), {0, 0.01, 0}}, K5);
    EXPECT_NEAR(std::abs(e(0)), 5.0, 1e-9);
    EXPECT_NEAR(e(0), e(1), 1e-9);

    // Vertical image line, endpoints shifted one pixel sideways.
    Correspondence v = identity_pair(CaseKind::PnL);
    v.source_endpoints = {Eigen::Vector3d(0.1, -0.3, 2), Eigen::Vector3d(0.1, 0.3, 2)};
    v.source_line = plucker_from_points(v.source_endpoints[0], v.source_endpoints[1]);
    const Eigen::Vector2d a = pinhole(K, v.source_endpoints[0]), b = pinhole(K, v.source_endpoints[1]);
    v.target_line_2d.endpoints = {a + Eigen::Vector2d(1, 0), b + Eigen::Vector2d(1, 0)};
    const Eigen::Vector2d ev = line_reprojection_residual(v, Extrinsics::identity(), K);
    EXPECT_NEAR(std::abs(ev(0)), 1.0, 1e-9);
    EXPECT_NEAR(std::abs(ev(1)), 1.0, 1e-9);
}

TEST(Residuals, PointToLine) {
    std::mt19937_64 rng(16);
    const CameraIntrinsics K = test_camera();
    const Extrinsics T = random_extrinsics(rng, 60.0, 0.4);
    Correspondence c = make_pair(rng, T, K, CaseKind::Full3D);
    for (const auto &e : point_to_line_residual(c, T)) {
        EXPECT_LT(e.norm(), 1e-9);
    }
    // Gaps along the target direction are invisible.
    c.target_3d->endpoints[0] += 0.3 * c.target_3d->line.d;
    EXPECT_LT(point_to_line_residual(c, T)[0].norm(), 1e-9);

    Correspondence z = identity_pair(CaseKind::Full3D);
    z.target_3d->line = {{0, 0, 1}, {0, 0, 0}};
    z.target_3d->endpoints = {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, 2)};
    z.source_endpoints = {Eigen::Vector3d(0.01, 0, 1), Eigen::Vector3d(0, 0, 2)};
    const auto e = point_to_line_residual(z, Extrinsics::identity());
    EXPECT_LT((e[0] - Eigen::Vector3d(0.01, 0, 0)).norm(), 1e-15);
    EXPECT_EQ(residual_block(z, Extrinsics::identity(), K).values.size(), 6);
}

TEST(Residuals, JacobiansMatchFiniteDifferences) {
    std::mt19937_64 rng(17);
    const CameraIntrinsics K = test_camera();
    for (int i = 0; i < 100; ++i) {
        const Extrinsics truth = random_extrinsics(rng, 80.0, 0.6);
        const Correspondence pnl = make_pair(rng, truth, K, CaseKind::PnL);
        const Correspondence f3 = make_pair(rng, truth, K, CaseKind::Full3D);
        Extrinsics T = truth;
        T.R = axis_angle(random_unit(rng), 4 * kDeg) * T.R;
        T.t += 0.05 * random_unit(rng);
        const auto Jl = numeric_jacobian<2>(T, [&](const Extrinsics &P) {
            return Eigen::Vector2d(line_reprojection_residual(pnl, P, K));
        });
        EXPECT_LT((line_reprojection_jacobian(pnl, T, K) - Jl).norm(), 1e-5 * std::max(1.0, Jl.norm()));
        const auto Jp = numeric_jacobian<6>(T, [&](const Extrinsics &P) {
            return Eigen::Matrix<double, 6, 1>(residual_block(f3, P, K).values);
        });
        EXPECT_LT((point_to_line_jacobian(f3, T) - Jp).norm(), 1e-7 * std::max(1.0, Jp.norm()));
    }
}
