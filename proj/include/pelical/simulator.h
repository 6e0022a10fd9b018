#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pelical/geometry.h"
#include "pelical/pipeline.h"

namespace pelical {

struct RigSpec {
    Extrinsics truth;
    CameraIntrinsics target_K;
    CameraIntrinsics source_K;
    int n_lines = 20;
    double line_length_min_m = 0.5;
    double line_length_max_m = 3.0;
    double scene_depth_min_m = 0.8;
    double scene_depth_max_m = 4.0;
    double pixel_noise_sigma = 0.0;
    double depth_noise_sigma = 0.0;
    // Noise along the viewing ray with sigma = depth_noise_sigma * z^2 instead of isotropic noise.
    bool axial_depth_noise = false;
    double outlier_fraction = 0.0;
    int samples_per_line = 40;
    double pnl_fraction = 0.3;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// 640x480 pinhole camera with a 615 px focal length.
CameraIntrinsics default_intrinsics();

// Source camera yawed by rotation_deg about y and shifted baseline_m along x in the target frame.
Extrinsics rig_extrinsics(double rotation_deg, double baseline_m);

RigSpec default_rig_spec();

struct GroundTruthRecord {
    int id = -1;
    PluckerLine target_frame_line; // true line of the source-side observation, target frame
    bool inlier = true;
    CaseKind intent = CaseKind::Full3D;
};

struct SimulatedStream {
    CameraIntrinsics target_K;
    CameraIntrinsics source_K;
    Extrinsics truth;
    std::vector<LineObservation> observations;
    std::vector<GroundTruthRecord> ground_truth;
};

// Throws InfeasibleSpec when 10000 consecutive line draws fail the visibility constraints.
SimulatedStream generate(const RigSpec &spec);

struct SweepCell {
    double rotation_deg = 0.0;
    double baseline_m = 0.0;
    int seed = 0;
    double rot_err_deg = 0.0;
    double trans_err_mm = 0.0;
    bool converged = false;
    bool has_pose = false;
    Extrinsics estimate;
    std::string error;
};

struct StepError {
    bool rotation_step = true; // rotation varied at fixed baseline, else baseline varied at fixed rotation
    double fixed_value = 0.0;  // baseline (m) or rotation (deg)
    double from = 0.0;
    double to = 0.0;
    double mean_error = 0.0; // degrees for rotation steps, cm for baseline steps
    int samples = 0;
};

struct SweepResult {
    std::vector<SweepCell> cells; // rotation-major, then baseline, then seed
    std::vector<StepError> steps;
};

SweepResult sweep(const RigSpec &base, std::span<const double> rotations_deg, std::span<const double> baselines_m,
                  int seeds_per_cell, const PipelineConfig &cfg);

} // namespace pelical
