#include "test_support.h"

#include "pelical/io.h"
#include "pelical/metrics.h"
#include "pelical/pipeline.h"
#include "pelical/simulator.h"

#include <gtest/gtest.h>

#include <functional>

using namespace pelical;
using namespace pelical::testing;

namespace {

Eigen::Matrix3d rxyz(double roll, double pitch, double yaw) {
    return axis_angle(Eigen::Vector3d::UnitX(), roll * kDeg) * axis_angle(Eigen::Vector3d::UnitY(), pitch * kDeg) *
           axis_angle(Eigen::Vector3d::UnitZ(), yaw * kDeg);
}

std::vector<Eigen::Vector3d> grid_on_plane(const Extrinsics &frame, int n) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            pts.push_back(frame.apply(Eigen::Vector3d(0.1 * i, 0.1 * j, 0)));
        }
    }
    return pts;
}

ErrorCode code_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::InvalidInput;
}

std::string message_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Euler, MatchesComposition) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> a(-170, 170), p(-80, 80);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector3d e(a(rng), p(rng), a(rng));
        EXPECT_LT((euler_xyz_deg(rxyz(e.x(), e.y(), e.z())) - e).norm(), 1e-9);
    }
    EXPECT_EQ(code_of([] { euler_xyz_deg(rxyz(0, 86, 0)); }), ErrorCode::InvalidInput);
}

TEST(PoseErrors, ExactStepsGiveZero) {
    std::vector<Extrinsics> rot, trans;
    for (int k = 0; k < 4; ++k) {
        rot.push_back({rxyz(5, -30 + 20 * k, 10), {0.3, 0, 0}});
        trans.push_back({rxyz(5, 20, 10), {0.2 + 0.05 * k, 0.0, 0.0}});
    }
    const PoseVariationErrors r = pose_variation_errors(rot);
    ASSERT_EQ(r.rotation_deg.size(), 3u);
    for (double e : r.rotation_deg) {
        EXPECT_LT(e, 1e-9);
    }
    for (double e : pose_variation_errors(trans).translation_cm) {
        EXPECT_LT(e, 1e-9);
    }
    rot[2].R = rxyz(5, 10.5, 10);
    EXPECT_NEAR(pose_variation_errors(rot).rotation_deg[1], 0.5, 1e-9);
}

TEST(Planes, FitAndMerge) {
    const Extrinsics board{axis_angle(Eigen::Vector3d(1, 1, 0), 20 * kDeg), {0.1, 0.2, 1.4}};
    const auto pts = grid_on_plane(board, 8);
    const Plane pl = fit_plane(pts);
    EXPECT_LT(pl.normal.cross(board.R.col(2)).norm(), 1e-12);
    EXPECT_NEAR(pl.offset, std::abs(board.R.col(2).dot(board.t)), 1e-12);
    EXPECT_GE(pl.offset, 0.0);

    std::vector<Eigen::Vector3d> line;
    for (int i = 0; i < 20; ++i) {
        line.push_back(Eigen::Vector3d(0.1 * i, 0, 1));
    }
    EXPECT_EQ(code_of([&] { fit_plane(line); }), ErrorCode::IllConditionedPlane);

    // Source points given in the source frame of a rig; merging with the true rig reproduces the target plane.
    const Extrinsics rig = rig_extrinsics(30.0, 0.25);
    PlaneMergeInput in;
    in.target_points = pts;
    for (const auto &p : pts) {
        in.source_points.push_back(rig.inverse().apply(p));
    }
    const PlaneMergeMetrics m = plane_merge_metrics(in, rig);
    EXPECT_LT(m.d_mm, 1e-9);
    EXPECT_LT(m.theta_deg, 1e-9);
    EXPECT_FALSE(m.l_mm.has_value());

    Extrinsics shifted = rig;
    shifted.t += 0.004 * board.R.col(2);
    EXPECT_NEAR(plane_merge_metrics(in, shifted).d_mm, 4.0, 1e-9);
}

TEST(Io, ObservationRoundTripIsByteStable) {
    RigSpec spec = default_rig_spec();
    spec.pixel_noise_sigma = 0.5;
    spec.depth_noise_sigma = 0.003;
    spec.pnl_fraction = 0.4;
    spec.rng_seed = 62;
    const SimulatedStream s = generate(spec);
    const std::string text = format_observation_file({s.target_K, s.source_K, s.observations});
    const ObservationFile back = parse_observation_file(text);
    EXPECT_EQ(format_observation_file(back), text);
    ASSERT_EQ(back.observations.size(), s.observations.size());
    EXPECT_EQ(back.observations[3].source_samples, s.observations[3].source_samples);
    EXPECT_EQ(back.observations[3].target_samples.has_value(), s.observations[3].target_samples.has_value());
}

TEST(Io, CalibrationRoundTrip) {
    RigSpec spec = default_rig_spec();
    spec.rng_seed = 63;
    const SimulatedStream s = generate(spec);
    const CalibrationReport rep = run(s.observations, s.target_K, s.source_K, PipelineConfig{});
    const std::string text = format_calibration_file(calibration_file_from_report(rep));
    const CalibrationFile back = parse_calibration_file(text);
    EXPECT_EQ(format_calibration_file(back), text);
    EXPECT_EQ(back.termination, rep.termination);
    EXPECT_EQ(back.inlier_ids, rep.inlier_ids);
    EXPECT_LT(rotation_error_deg(back.extrinsics.R, rep.extrinsics.R), 1e-12);

    CalibrationFile bad = back;
    bad.extrinsics.R(0, 0) += 0.1;
    EXPECT_EQ(code_of([&] { format_calibration_file(bad); }), ErrorCode::Schema);
}

TEST(Io, SchemaErrorsNameTheProblem) {
    EXPECT_EQ(message_of([] { parse_observation_file("{\"target_intrinsics\": "); }).rfind("malformed JSON at byte", 0),
              0u);
    const std::string missing = message_of([] {
        parse_observation_file(R"({"target_intrinsics": {"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 2, "height": 2},
                                   "source_intrinsics": {"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 2, "height": 2},
                                   "observations": [{"id": 0}]})");
    });
    EXPECT_NE(missing.find("observations[0].target_2d"), std::string::npos) << missing;
    EXPECT_EQ(code_of([] { parse_pipeline_config(R"({"epsilon": 0.1})", PipelineConfig{}); }), ErrorCode::Schema);
    EXPECT_EQ(code_of([] { read_text_file("/nonexistent/pelical/file.json"); }), ErrorCode::Io);
}

TEST(Io, ConfigOverlays) {
    PipelineConfig base;
    base.max_pairs = 50;
    const PipelineConfig cfg =
        parse_pipeline_config(R"({"epsilon_d_m": 0.03, "ransac": {"iterations": 50}, "rng_seed": 9})", base);
    EXPECT_DOUBLE_EQ(cfg.epsilon_d_m, 0.03);
    EXPECT_EQ(cfg.ransac.iterations, 50);
    EXPECT_EQ(cfg.max_pairs, 50);
    EXPECT_EQ(cfg.rng_seed, 9u);
    const PipelineConfig again = parse_pipeline_config(format_pipeline_config(cfg), PipelineConfig{});
    EXPECT_EQ(format_pipeline_config(again), format_pipeline_config(cfg));

    RigSpec rbase = default_rig_spec();
    rbase.n_lines = 12;
    const RigSpec spec = parse_rig_spec(R"({"rotation_deg": 40, "pixel_noise_sigma": 0.5})", rbase);
    EXPECT_LT(rotation_error_deg(spec.truth.R, rig_extrinsics(40.0, 0.30).R), 1e-12);
    EXPECT_EQ(spec.n_lines, 12);
    EXPECT_DOUBLE_EQ(spec.pixel_noise_sigma, 0.5);
    EXPECT_EQ(format_rig_spec(parse_rig_spec(format_rig_spec(spec), default_rig_spec())), format_rig_spec(spec));
    EXPECT_EQ(code_of([] { parse_rig_spec(R"({"lines": 3})", default_rig_spec()); }), ErrorCode::Schema);
}

TEST(Io, CsvLayout) {
    SweepResult r;
    SweepCell ok;
    ok.rotation_deg = 20;
    ok.baseline_m = 0.3;
    ok.seed = 1;
    ok.rot_err_deg = 0.5;
    ok.trans_err_mm = 2.0;
    ok.converged = true;
    SweepCell failed = ok;
    failed.converged = false;
    failed.has_pose = false;
    r.cells = {ok, failed};
    const std::string csv = format_sweep_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "rotation_deg,baseline_m,seed,rot_err_deg,trans_err_mm,converged");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    const std::string steps = format_step_csv(r);
    EXPECT_EQ(steps.substr(0, steps.find('\n')), "kind,fixed_value,from,to,mean_error,samples");
}
