#pragma once

#include <Eigen/Core>

#include <limits>
#include <span>
#include <vector>

#include "pelical/constraints.h"
#include "pelical/geometry.h"

namespace pelical {

struct SolverConfig {
    int max_lm_iterations = 100;
    double lm_initial_damping = 1e-3;
    double cost_tolerance = 1e-10; // relative decrease
    double oracle_grid_halfwidth = 2.0;
    double oracle_grid_step = 0.05;
    // Start points for the local root search: a regular grid over [-w, w]^3.
    double multistart_halfwidth = 2.0;
    int multistart_points_per_axis = 5;
};

struct TranslationElimination {
    Eigen::Matrix<double, Eigen::Dynamic, 10> G; // (I - B B^+) A
    Eigen::Matrix<double, 3, 10> tau_map;         // -B^+ A
};

TranslationElimination eliminate_translation(const QuadraticSystem &sys);

struct CgrRoot {
    Eigen::Vector3d s;
    Eigen::Vector3d tau;
    double residual = 0.0; // ||A r + B tau||_2
};

struct PoseSolution {
    Extrinsics extrinsics;
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    double algebraic_residual = 0.0;
    double initial_cost = std::numeric_limits<double>::quiet_NaN();
    double refined_cost = std::numeric_limits<double>::quiet_NaN();
    std::vector<CgrRoot> all_candidates;
    int iterations = 0;
    // Cost after every accepted refinement step, starting with the initial cost.
    std::vector<double> cost_history;
    // False when refinement hit max_lm_iterations before the cost settled.
    bool converged = true;
};

// Finds the real CGR roots of the merged system and returns the one with the smallest algebraic residual.
PoseSolution solve_quadratic_system(const QuadraticSystem &sys, const SolverConfig &cfg);

// Per-correspondence weights of the refinement cost. Point-to-line terms are converted to
// pixel-equivalents by (fx / z)^2 with z the mean depth of the target line endpoints.
std::vector<double> residual_weights(std::span<const Correspondence> cs, const CameraIntrinsics &K_t);

// Weighted sum of squared residuals over all correspondences.
double refinement_cost(std::span<const Correspondence> cs, const CameraIntrinsics &K_t, const Extrinsics &T);

// Levenberg-Marquardt on (R, t) with R <- exp([w]x) R.
PoseSolution refine(const PoseSolution &initial, std::span<const Correspondence> cs, const CameraIntrinsics &K_t,
                    const SolverConfig &cfg);

// Largest relative deviation between analytic and central-difference Jacobians over all residual blocks.
double jacobian_check(std::span<const Correspondence> cs, const CameraIntrinsics &K_t, const Extrinsics &T,
                      double step = 1e-6);

} // namespace pelical
