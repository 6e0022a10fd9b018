#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "pelical/geometry.h"
#include "pelical/metrics.h"
#include "pelical/pipeline.h"
#include "pelical/simulator.h"

// JSON and CSV interchange. Writers are canonical: fixed key order, two-space indent, doubles printed
// with 17 significant digits, so write -> read -> write reproduces the same bytes.
// Malformed text throws Error(Schema) citing the byte offset; structural problems name the field path.
namespace pelical {

struct ObservationFile {
    CameraIntrinsics target_K;
    CameraIntrinsics source_K;
    std::vector<LineObservation> observations;
};

ObservationFile parse_observation_file(const std::string &text);
std::string format_observation_file(const ObservationFile &file);

struct CalibrationFile {
    Extrinsics extrinsics;
    std::optional<Eigen::Vector3d> cgr; // absent near a half-turn
    double final_cost = 0.0;             // NaN when no pose was solved
    Termination termination = Termination::Aborted;
    bool has_pose = false;
    int accepted_pair_count = 0;
    int voting_inlier_count = 0;
    std::vector<int> inlier_ids;
    std::vector<TraceEntry> trace;
};

CalibrationFile calibration_file_from_report(const CalibrationReport &report);
// Both directions reject a rotation that is not orthonormal within 1e-9.
CalibrationFile parse_calibration_file(const std::string &text);
std::string format_calibration_file(const CalibrationFile &file);

// Keys present in the document override base. "rotation_deg" / "baseline_m" describe the standard rig
// (a missing partner takes 20 deg / 0.30 m); an explicit "truth" object wins over them.
RigSpec parse_rig_spec(const std::string &text, const RigSpec &base);
std::string format_rig_spec(const RigSpec &spec);

// Keys present in the document override the corresponding fields of base; unknown keys are errors.
PipelineConfig parse_pipeline_config(const std::string &text, const PipelineConfig &base);
std::string format_pipeline_config(const PipelineConfig &cfg);

std::string format_truth_file(const SimulatedStream &stream);
Extrinsics parse_truth_extrinsics(const std::string &text);

PlaneMergeInput parse_plane_merge_input(const std::string &text);
std::string format_plane_merge_metrics(const PlaneMergeMetrics &metrics);

struct PoseGroups {
    std::vector<std::vector<Extrinsics>> rotation_groups;    // rotation varied, baseline fixed
    std::vector<std::vector<Extrinsics>> translation_groups; // baseline varied, rotation fixed
};

PoseGroups parse_pose_groups(const std::string &text);
std::string format_pose_errors(const std::vector<PoseVariationErrors> &rotation,
                               const std::vector<PoseVariationErrors> &translation);

// Header: rotation_deg,baseline_m,seed,rot_err_deg,trans_err_mm,converged
std::string format_sweep_csv(const SweepResult &result);
// Header: kind,fixed_value,from,to,mean_error,samples
std::string format_step_csv(const SweepResult &result);

std::string read_text_file(const std::string &path);
void write_text_file(const std::string &path, const std::string &text);

} // namespace pelical
