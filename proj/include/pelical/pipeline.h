#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pelical/constraints.h"
#include "pelical/geometry.h"
#include "pelical/selection.h"
#include "pelical/solver.h"

namespace pelical {

// Raw matched line pair before fitting and classification.
struct LineObservation {
    int id = -1;
    Line2D target_2d;
    Line2D source_2d;
    std::optional<std::vector<Eigen::Vector3d>> target_samples; // absent when the target has no depth
    std::vector<Eigen::Vector3d> source_samples;
};

struct RansacConfig {
    double distance_threshold_m = 0.01;
    int iterations = 200;
    int min_inlier_count = 8;
};

struct VoteThresholdPolicy {
    int min_votes = 4;
    double fraction = 0.6;

    int threshold(size_t num_lines) const;
};

struct PipelineConfig {
    double inlier_ratio_threshold = 0.8;
    RansacConfig ransac;
    double epsilon_d_m = 0.02;
    VoteThresholdPolicy vote_threshold;
    // Mean refinement cost per correspondence in px^2-equivalents.
    double cost_threshold = 2.0;
    int max_pairs = 200;
    std::uint64_t rng_seed = 0;
    // Finalization is attempted after every accepted pair once this many are held.
    int min_pairs_for_finalize = 4;
    // Accepted pairs are dropped when leaving them out shrinks d_SO(3) below this factor.
    double gate_prune_factor = 0.5;
    // Cold start: the first bootstrap_window classified pairs are held back and only the largest
    // rotation-consistent subset (residual below bootstrap_angle_deg) seeds the gate. 0 accepts the first
    // pairs unconditionally until the gate has 9 rows.
    int bootstrap_window = 8;
    double bootstrap_angle_deg = 3.0;
    SolverConfig solver;

    void validate() const;
};

struct LineFit {
    PluckerLine line;
    double inlier_ratio = 0.0;
    int inlier_count = 0;
    std::array<Eigen::Vector3d, 2> endpoints{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
};

LineFit ransac_fit_line(std::span<const Eigen::Vector3d> samples, const RansacConfig &cfg, std::uint64_t seed);

// Flips the fitted line so that its image runs from the first to the second segment endpoint.
LineFit orient_with_segment(const LineFit &fit, const CameraIntrinsics &K, const Line2D &segment);

enum class RoundStatus { Accepted, Rejected, GateRejected, Deferred };
enum class Termination { Converged, MaxPairs, Aborted };

const char *to_string(RoundStatus s);
const char *to_string(Termination t);

struct RoundOutcome {
    RoundStatus status = RoundStatus::Rejected;
    std::string reason;
    Classification classification = Classification::Reject;
    double so3_distance = std::numeric_limits<double>::quiet_NaN();
    std::vector<int> pruned_ids; // previously accepted pairs dropped by the gate
    std::vector<int> seeded_ids; // deferred pairs accepted when the bootstrap window closed
};

struct TraceEntry {
    int observations = 0; // observations consumed when the attempt ran
    int accepted_pairs = 0;
    double so3_distance = std::numeric_limits<double>::quiet_NaN();
    int vote_size = 0;
    bool vote_converged = false;
    double cost = std::numeric_limits<double>::quiet_NaN(); // mean per correspondence
    std::string note;
};

struct CalibrationReport {
    Extrinsics extrinsics;
    bool has_pose = false;
    double final_cost = std::numeric_limits<double>::quiet_NaN();
    int accepted_pair_count = 0;
    int voting_inlier_count = 0;
    std::vector<int> inlier_ids;
    Termination termination = Termination::Aborted;
    std::vector<TraceEntry> trace;
};

// Streaming calibration state machine: fit, classify, gate, vote, solve, refine.
class Calibrator {
  public:
    Calibrator(const CameraIntrinsics &target_K, const CameraIntrinsics &source_K, const PipelineConfig &cfg);

    // Builds a correspondence from an observation; nullopt with a reason when it is rejected.
    std::optional<Correspondence> make_correspondence(const LineObservation &obs, std::string *reason) const;

    RoundOutcome ingest(const LineObservation &obs);

    // Closes the bootstrap window early (end of stream). Returns the ids that entered the gate.
    std::vector<int> flush_bootstrap();
    bool bootstrap_pending() const { return !pending_.empty(); }

    // Runs voting and the solver over the accepted pairs; nullopt while not converged.
    std::optional<CalibrationReport> try_finalize();

    // Report for a stream that ended without convergence.
    CalibrationReport report(Termination termination) const;

    const std::vector<Correspondence> &accepted() const { return accepted_; }
    const RotationGateState &gate() const { return gate_; }
    const std::vector<TraceEntry> &trace() const { return trace_; }
    const std::vector<double> &accepted_distances() const { return accepted_distances_; }
    // Correspondences that entered the last successful solve.
    const std::vector<Correspondence> &solved_inliers() const { return solved_inliers_; }
    const std::optional<PoseSolution> &last_initial_solution() const { return last_initial_; }
    int observations_seen() const { return observations_seen_; }
    const PipelineConfig &config() const { return cfg_; }
    const CameraIntrinsics &target_intrinsics() const { return target_K_; }

  private:
    CameraIntrinsics target_K_;
    CameraIntrinsics source_K_;
    PipelineConfig cfg_;
    RotationGateState gate_;
    std::vector<Correspondence> accepted_;
    std::vector<Correspondence> pending_;
    bool bootstrap_done_ = false;
    std::vector<double> accepted_distances_;
    std::vector<TraceEntry> trace_;
    std::vector<Correspondence> solved_inliers_;
    std::optional<PoseSolution> last_initial_;
    std::optional<PoseSolution> last_solution_;
    double last_cost_ = std::numeric_limits<double>::quiet_NaN();
    int observations_seen_ = 0;

    bool admit(const Correspondence &c, RoundOutcome *outcome);
};

CalibrationReport run(std::span<const LineObservation> stream, const CameraIntrinsics &target_K,
                      const CameraIntrinsics &source_K, const PipelineConfig &cfg);

} // namespace pelical
