#pragma once

#include <Eigen/Core>

#include <limits>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "pelical/constraints.h"
#include "pelical/geometry.h"

namespace pelical {

// Rows of C vec(R) = b for one correspondence. vec(R) is row-major: R(i, j) sits at 3 i + j.
struct RotationRows {
    Eigen::Matrix<double, Eigen::Dynamic, 9> C;
    Eigen::VectorXd b;
};

// Full3D: d_t = R d_s (three rows). PnL: n' R d_s = 0 with n = (P_t' l_t)_{1:3} scaled to unit length.
RotationRows rotation_rows(const Correspondence &c, const CameraIntrinsics &K_t);

struct RotationGateState {
    Eigen::Matrix<double, Eigen::Dynamic, 9> C;
    Eigen::VectorXd b;
    std::vector<Eigen::Index> block_rows; // rows contributed by each accepted correspondence
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity(); // projection of M onto SO(3)
    bool has_rotation = false;
    double current_distance = std::numeric_limits<double>::infinity();

    Eigen::Index rows() const { return C.rows(); }
};

// Distances at or below this value are treated as exact; ties there do not block acceptance.
inline constexpr double kGateDistanceFloor = 1e-12;

struct GateDecision {
    bool accept = false;
    bool underdetermined = false; // least-squares solve had fewer than 9 rows
    double distance = std::numeric_limits<double>::infinity();
    RotationGateState state; // the updated state on accept, the unchanged state otherwise
};

// Least-squares rotation estimate for the given rows, projected onto SO(3).
struct RotationEstimate {
    Eigen::Matrix3d M;
    Eigen::Matrix3d R;
    bool has_rotation = false;
    double distance = std::numeric_limits<double>::infinity();
};

RotationEstimate estimate_rotation(const Eigen::Matrix<double, Eigen::Dynamic, 9> &C, const Eigen::VectorXd &b);

GateDecision gate_rotation(const RotationGateState &state, const RotationRows &new_rows);

// Gate state holding the given blocks, accepted without the distance test.
RotationGateState seed_rotation_gate(std::span<const RotationRows> blocks);

// Drops accepted blocks whose removal shrinks the distance below factor * current. Returns removed block
// indices in the order they were removed (indices refer to the state at the time of removal).
std::vector<size_t> prune_rotation_gate(RotationGateState &state, double factor);

// Angle between R d_s and d_t (Full3D) or between R d_s and the target interpretation plane (PnL), radians.
double rotation_residual(const Correspondence &c, const Eigen::Matrix3d &R, const CameraIntrinsics &K_t);

// Rotation fitted to two direction correspondences (Kabsch on d_1, d_2 and d_1 x d_2).
std::optional<Eigen::Matrix3d> rotation_from_two_directions(const Correspondence &a, const Correspondence &b);

struct RotationConsensus {
    std::vector<size_t> members; // ascending indices into the input
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    double summed_residual = 0.0;
};

// Exhaustive two-direction hypotheses over the Full3D pairs; returns the largest set whose residuals stay
// below angle_tol (ties: smaller summed residual). nullopt when no hypothesis can be formed.
std::optional<RotationConsensus> rotation_consensus(std::span<const Correspondence> pairs,
                                                    const CameraIntrinsics &K_t, double angle_tol);

// Full3D pairs pin t to a line. A PnL pair only pins t to a plane: both endpoint planes contain the
// interpretation plane of the target segment, so at the exact rotation they coincide.
enum class CandidateShape { Line, Plane };

struct CandidateLine {
    CandidateShape shape = CandidateShape::Line;
    Eigen::Vector3d p0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d u = Eigen::Vector3d::UnitZ(); // direction for a line, unit normal for a plane
    int correspondence_id = -1;
    CaseKind kind = CaseKind::Full3D;

    double distance_to(const Eigen::Vector3d &X) const {
        return shape == CandidateShape::Line ? (X - p0).cross(u).norm() : std::abs((X - p0).dot(u));
    }
};

CandidateLine candidate_from_full3d(const Correspondence &c, const Eigen::Matrix3d &R);
CandidateLine candidate_from_pnl(const Correspondence &c, const Eigen::Matrix3d &R, const CameraIntrinsics &K_t);
CandidateLine candidate_line(const Correspondence &c, const Eigen::Matrix3d &R, const CameraIntrinsics &K_t);

// Midpoint of the common perpendicular of two non-parallel lines.
Eigen::Vector3d equidistant_point(const CandidateLine &l1, const CandidateLine &l2);

// Point proposed by a pair of candidates: equidistant point for two lines, intersection for a line and a
// plane, nothing for two planes or (near) parallel configurations.
std::optional<Eigen::Vector3d> hypothesis_point(const CandidateLine &a, const CandidateLine &b);

struct VotingResult {
    std::vector<int> inlier_set; // indices into the input list, ascending
    std::optional<Eigen::Vector3d> convergence_point;
    double epsilon_d = 0.0;
    bool converged = false;
    double summed_distance = 0.0;
};

int default_vote_threshold(size_t num_lines);

VotingResult convergence_voting(std::span<const CandidateLine> lines, double epsilon_d, int vote_threshold);

} // namespace pelical
