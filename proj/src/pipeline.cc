#include "pelical/pipeline.h"

#include "pelical/random.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace pelical {

const char *to_string(RoundStatus s) {
    switch (s) {
    case RoundStatus::Accepted: return "Accepted";
    case RoundStatus::Rejected: return "Rejected";
    case RoundStatus::GateRejected: return "GateRejected";
    case RoundStatus::Deferred: return "Deferred";
    }
    return "Rejected";
}

const char *to_string(Termination t) {
    switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxPairs: return "MaxPairs";
    case Termination::Aborted: return "Aborted";
    }
    return "Aborted";
}

int VoteThresholdPolicy::threshold(size_t num_lines) const {
    return std::max(min_votes, static_cast<int>(std::ceil(fraction * static_cast<double>(num_lines))));
}

void PipelineConfig::validate() const {
    const bool ok = inlier_ratio_threshold > 0.0 && inlier_ratio_threshold <= 1.0 && ransac.distance_threshold_m > 0.0 &&
                    ransac.iterations > 0 && ransac.min_inlier_count > 0 && epsilon_d_m > 0.0 &&
                    vote_threshold.min_votes > 0 && vote_threshold.fraction > 0.0 && cost_threshold > 0.0 &&
                    max_pairs > 0 && min_pairs_for_finalize > 0 && gate_prune_factor > 0.0 &&
                    bootstrap_window >= 0 && bootstrap_angle_deg > 0.0 &&
                    solver.max_lm_iterations > 0 && solver.lm_initial_damping > 0.0 && solver.cost_tolerance > 0.0;
    if (!ok) {
        throw Error(ErrorCode::InvalidInput, "pipeline thresholds must be positive");
    }
}

LineFit ransac_fit_line(std::span<const Eigen::Vector3d> samples, const RansacConfig &cfg, std::uint64_t seed) {
    const int n = static_cast<int>(samples.size());
    if (n < 2) {
        throw Error(ErrorCode::TooFewSamples, "line fitting needs at least two samples");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    std::vector<int> best_inliers;
    std::vector<int> inliers;
    const int iterations = n == 2 ? 1 : cfg.iterations;
    for (int it = 0; it < iterations; ++it) {
        int a = 0, b = 1;
        if (n > 2) {
            a = pick(rng);
            do {
                b = pick(rng);
            } while (b == a);
        }
        const Eigen::Vector3d delta = samples[b] - samples[a];
        if (delta.norm() < 1e-9) {
            continue;
        }
        const Eigen::Vector3d d = delta.normalized();
        inliers.clear();
        for (int k = 0; k < n; ++k) {
            if ((samples[k] - samples[a]).cross(d).norm() < cfg.distance_threshold_m) {
                inliers.push_back(k);
            }
        }
        if (inliers.size() > best_inliers.size()) {
            best_inliers = inliers;
        }
    }
    if (best_inliers.size() < 2) {
        throw Error(ErrorCode::DegenerateLine, "samples do not support a line");
    }

    // Least-squares refit: principal direction through the inlier centroid.
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int k : best_inliers) {
        centroid += samples[k];
    }
    centroid /= static_cast<double>(best_inliers.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int k : best_inliers) {
        const Eigen::Vector3d q = samples[k] - centroid;
        cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d d = eig.eigenvectors().col(2).normalized();

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k : best_inliers) {
        const double proj = (samples[k] - centroid).dot(d);
        lo = std::min(lo, proj);
        hi = std::max(hi, proj);
    }

    LineFit fit;
    fit.line.d = d;
    fit.line.m = centroid.cross(d);
    fit.inlier_count = static_cast<int>(best_inliers.size());
    fit.inlier_ratio = static_cast<double>(best_inliers.size()) / n;
    fit.endpoints = {centroid + lo * d, centroid + hi * d};
    return fit;
}

LineFit orient_with_segment(const LineFit &fit, const CameraIntrinsics &K, const Line2D &segment) {
    const Eigen::Vector2d image_dir = segment.endpoints[1] - segment.endpoints[0];
    // Image-plane velocity of a point moving along d, evaluated at the segment midpoint.
    const Eigen::Vector3d X = 0.5 * (fit.endpoints[0] + fit.endpoints[1]);
    const Eigen::Vector3d &d = fit.line.d;
    const Eigen::Vector2d flow(K.fx * (d.x() * X.z() - X.x() * d.z()), K.fy * (d.y() * X.z() - X.y() * d.z()));
    if (flow.dot(image_dir) >= 0.0) {
        return fit;
    }
    LineFit out = fit;
    out.line = fit.line.flipped();
    out.endpoints = {fit.endpoints[1], fit.endpoints[0]};
    return out;
}

Calibrator::Calibrator(const CameraIntrinsics &target_K, const CameraIntrinsics &source_K, const PipelineConfig &cfg)
    : target_K_(target_K), source_K_(source_K), cfg_(cfg) {
    target_K_.validate();
    source_K_.validate();
    cfg_.validate();
}

std::optional<Correspondence> Calibrator::make_correspondence(const LineObservation &obs, std::string *reason) const {
    const auto fail = [&](const std::string &why) -> std::optional<Correspondence> {
        if (reason) {
            *reason = why;
        }
        return std::nullopt;
    };
    const std::uint64_t salt = 2 * static_cast<std::uint64_t>(static_cast<std::uint32_t>(obs.id));
    const auto effective_ratio = [&](const LineFit &fit) {
        return fit.inlier_count >= cfg_.ransac.min_inlier_count ? fit.inlier_ratio : 0.0;
    };

    LineFit source_fit;
    try {
        source_fit = ransac_fit_line(obs.source_samples, cfg_.ransac, mix_seed(cfg_.rng_seed, salt));
    } catch (const Error &e) {
        return fail(std::string("source fit: ") + e.what());
    }
    std::optional<LineFit> target_fit;
    if (obs.target_samples && obs.target_samples->size() >= 2) {
        try {
            target_fit = ransac_fit_line(*obs.target_samples, cfg_.ransac, mix_seed(cfg_.rng_seed, salt + 1));
        } catch (const Error &) {
            target_fit.reset();
        }
    }
    const double source_ratio = effective_ratio(source_fit);
    const double target_ratio = target_fit ? effective_ratio(*target_fit) : 0.0;
    const Classification cls = classify(source_ratio, target_ratio, cfg_.inlier_ratio_threshold);
    if (cls == Classification::Reject) {
        return fail("classification");
    }

    source_fit = orient_with_segment(source_fit, source_K_, obs.source_2d);
    Correspondence c;
    c.id = obs.id;
    c.kind = cls == Classification::Full3D ? CaseKind::Full3D : CaseKind::PnL;
    c.source_line = source_fit.line;
    c.source_endpoints = source_fit.endpoints;
    c.target_line_2d = obs.target_2d;
    c.source_inlier_ratio = source_ratio;
    c.target_inlier_ratio = target_ratio;
    if (c.kind == CaseKind::Full3D) {
        const LineFit oriented = orient_with_segment(*target_fit, target_K_, obs.target_2d);
        c.target_3d = TargetLine3D{oriented.line, oriented.endpoints};
    }
    return c;
}

RoundOutcome Calibrator::ingest(const LineObservation &obs) {
    ++observations_seen_;
    RoundOutcome outcome;
    std::string reason;
    const std::optional<Correspondence> c = make_correspondence(obs, &reason);
    if (!c) {
        outcome.status = RoundStatus::Rejected;
        outcome.reason = reason;
        return outcome;
    }
    outcome.classification = c->kind == CaseKind::Full3D ? Classification::Full3D : Classification::PnL;

    if (!bootstrap_done_ && cfg_.bootstrap_window > 0) {
        pending_.push_back(*c);
        if (static_cast<int>(pending_.size()) < cfg_.bootstrap_window) {
            outcome.status = RoundStatus::Deferred;
            outcome.reason = "bootstrap window";
            return outcome;
        }
        outcome.seeded_ids = flush_bootstrap();
        const bool self = std::find(outcome.seeded_ids.begin(), outcome.seeded_ids.end(), c->id) != outcome.seeded_ids.end();
        outcome.so3_distance = gate_.current_distance;
        outcome.status = self ? RoundStatus::Accepted : RoundStatus::GateRejected;
        outcome.reason = self ? "bootstrap consensus" : "outside bootstrap consensus";
        return outcome;
    }
    admit(*c, &outcome);
    return outcome;
}

bool Calibrator::admit(const Correspondence &c, RoundOutcome *outcome) {
    const bool gate_active = gate_.rows() >= 9;
    GateDecision decision = gate_rotation(gate_, rotation_rows(c, target_K_));
    outcome->so3_distance = decision.distance;
    if (!decision.accept) {
        outcome->status = RoundStatus::GateRejected;
        outcome->reason = "rotation gate";
        return false;
    }
    gate_ = std::move(decision.state);
    accepted_.push_back(c);
    for (size_t block : prune_rotation_gate(gate_, cfg_.gate_prune_factor)) {
        outcome->pruned_ids.push_back(accepted_[block].id);
        accepted_.erase(accepted_.begin() + static_cast<std::ptrdiff_t>(block));
    }
    outcome->so3_distance = gate_.current_distance;
    if (gate_active || !outcome->pruned_ids.empty()) {
        accepted_distances_.push_back(gate_.current_distance);
    }
    outcome->status = RoundStatus::Accepted;
    outcome->reason = decision.underdetermined ? "bootstrap (underdetermined)" : (gate_active ? "gate" : "bootstrap");
    return true;
}

std::vector<int> Calibrator::flush_bootstrap() {
    bootstrap_done_ = true;
    std::vector<Correspondence> pending = std::move(pending_);
    pending_.clear();
    const std::optional<RotationConsensus> consensus =
        rotation_consensus(pending, target_K_, cfg_.bootstrap_angle_deg * std::numbers::pi / 180.0);
    std::vector<int> ids;
    if (!consensus || consensus->members.size() < 2) {
        // No two-direction hypothesis: fall back to the unconditional bootstrap.
        for (const Correspondence &c : pending) {
            RoundOutcome scratch;
            if (admit(c, &scratch)) {
                ids.push_back(c.id);
            }
            for (int id : scratch.pruned_ids) {
                ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
            }
        }
        return ids;
    }
    std::vector<RotationRows> blocks;
    for (size_t k : consensus->members) {
        accepted_.push_back(pending[k]);
        blocks.push_back(rotation_rows(pending[k], target_K_));
        ids.push_back(pending[k].id);
    }
    gate_ = seed_rotation_gate(blocks);
    if (gate_.rows() >= 9) {
        accepted_distances_.push_back(gate_.current_distance);
    }
    return ids;
}

std::optional<CalibrationReport> Calibrator::try_finalize() {
    if (static_cast<int>(accepted_.size()) < std::max(2, cfg_.min_pairs_for_finalize)) {
        return std::nullopt;
    }
    TraceEntry entry;
    entry.observations = observations_seen_;
    entry.accepted_pairs = static_cast<int>(accepted_.size());
    entry.so3_distance = gate_.current_distance;
    const auto not_ready = [&](const std::string &note) -> std::optional<CalibrationReport> {
        entry.note = note;
        trace_.push_back(entry);
        return std::nullopt;
    };
    if (!gate_.has_rotation) {
        return not_ready("no rotation estimate");
    }

    std::vector<CandidateLine> lines;
    std::vector<size_t> owners;
    for (size_t i = 0; i < accepted_.size(); ++i) {
        try {
            lines.push_back(candidate_line(accepted_[i], gate_.R, target_K_));
            owners.push_back(i);
        } catch (const Error &) {
            // Degenerate endpoint geometry contributes no candidate.
        }
    }
    VotingResult vote;
    try {
        vote = convergence_voting(lines, cfg_.epsilon_d_m, cfg_.vote_threshold.threshold(lines.size()));
    } catch (const Error &e) {
        return not_ready(std::string("voting: ") + to_string(e.code()));
    }
    entry.vote_size = static_cast<int>(vote.inlier_set.size());
    entry.vote_converged = vote.converged;
    if (!vote.converged) {
        return not_ready("vote not converged");
    }

    std::vector<Correspondence> inliers;
    for (int k : vote.inlier_set) {
        inliers.push_back(accepted_[owners[k]]);
    }
    PoseSolution refined;
    try {
        const QuadraticSystem sys = assemble(inliers, target_K_);
        const PoseSolution initial = solve_quadratic_system(sys, cfg_.solver);
        refined = refine(initial, inliers, target_K_, cfg_.solver);
        last_initial_ = initial;
    } catch (const Error &e) {
        return not_ready(std::string("solver: ") + to_string(e.code()));
    }
    const double mean_cost = refined.refined_cost / static_cast<double>(inliers.size());
    entry.cost = mean_cost;
    last_solution_ = refined;
    last_cost_ = mean_cost;
    solved_inliers_ = inliers;
    if (!(mean_cost < cfg_.cost_threshold)) {
        return not_ready("cost above threshold");
    }
    entry.note = "converged";
    trace_.push_back(entry);
    return report(Termination::Converged);
}

CalibrationReport Calibrator::report(Termination termination) const {
    CalibrationReport rep;
    rep.termination = termination;
    rep.accepted_pair_count = static_cast<int>(accepted_.size());
    rep.trace = trace_;
    if (last_solution_) {
        rep.extrinsics = last_solution_->extrinsics;
        rep.has_pose = true;
        rep.final_cost = last_cost_;
        rep.voting_inlier_count = static_cast<int>(solved_inliers_.size());
        for (const Correspondence &c : solved_inliers_) {
            rep.inlier_ids.push_back(c.id);
        }
    } else if (gate_.has_rotation) {
        rep.extrinsics.R = gate_.R;
    }
    return rep;
}

CalibrationReport run(std::span<const LineObservation> stream, const CameraIntrinsics &target_K,
                      const CameraIntrinsics &source_K, const PipelineConfig &cfg) {
    if (stream.empty()) {
        throw Error(ErrorCode::EmptyInput, "observation stream is empty");
    }
    Calibrator calib(target_K, source_K, cfg);
    bool capped = false;
    for (const LineObservation &obs : stream) {
        if (calib.observations_seen() >= cfg.max_pairs) {
            capped = true;
            break;
        }
        const RoundOutcome outcome = calib.ingest(obs);
        if (outcome.status != RoundStatus::Accepted && outcome.seeded_ids.empty()) {
            continue;
        }
        if (std::optional<CalibrationReport> rep = calib.try_finalize()) {
            return *rep;
        }
    }
    if (calib.bootstrap_pending() && !calib.flush_bootstrap().empty()) {
        if (std::optional<CalibrationReport> rep = calib.try_finalize()) {
            return *rep;
        }
    }
    return calib.report(capped ? Termination::MaxPairs : Termination::Aborted);
}

} // namespace pelical
