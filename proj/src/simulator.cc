#include "pelical/simulator.h"

#include "pelical/metrics.h"
#include "pelical/random.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <thread>

namespace pelical {

void RigSpec::validate() const {
    target_K.validate();
    source_K.validate();
    if (!truth.is_valid(1e-9)) {
        throw Error(ErrorCode::InvalidInput, "truth rotation must be orthonormal");
    }
    if (n_lines <= 0 || samples_per_line < 2) {
        throw Error(ErrorCode::InvalidInput, "n_lines must be positive and samples_per_line at least 2");
    }
    if (!(line_length_min_m > 0.0 && line_length_max_m >= line_length_min_m)) {
        throw Error(ErrorCode::InvalidInput, "line_length range is invalid");
    }
    if (!(scene_depth_min_m > 0.0 && scene_depth_max_m >= scene_depth_min_m)) {
        throw Error(ErrorCode::InvalidInput, "scene_depth range is invalid");
    }
    if (!(pixel_noise_sigma >= 0.0 && depth_noise_sigma >= 0.0)) {
        throw Error(ErrorCode::InvalidInput, "noise sigmas must be non-negative");
    }
    if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0) || !(pnl_fraction >= 0.0 && pnl_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidInput, "fractions out of range");
    }
}

CameraIntrinsics default_intrinsics() { return {615.0, 615.0, 319.5, 239.5, 640, 480}; }

Extrinsics rig_extrinsics(double rotation_deg, double baseline_m) {
    Extrinsics T;
    T.R = Eigen::AngleAxisd(rotation_deg * std::numbers::pi / 180.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
    T.t = Eigen::Vector3d(baseline_m, 0.0, 0.0);
    return T;
}

RigSpec default_rig_spec() {
    RigSpec spec;
    spec.truth = rig_extrinsics(20.0, 0.30);
    spec.target_K = default_intrinsics();
    spec.source_K = default_intrinsics();
    return spec;
}

namespace {

struct Segment {
    Eigen::Vector3d a; // target frame, ordered along the line direction
    Eigen::Vector3d b;
};

struct SceneLine {
    Eigen::Vector3d origin;
    Eigen::Vector3d dir;
    Segment target_view;
    Segment source_view;
};

constexpr int kVisibilitySteps = 800;
constexpr int kMaxConsecutiveFailures = 10000;

std::optional<Segment> visible_run(const Eigen::Vector3d &origin, const Eigen::Vector3d &dir, double length,
                                   double seed_lambda, const Extrinsics &world_to_cam, const CameraIntrinsics &K) {
    const auto point = [&](int k) { return origin + (length * k / kVisibilitySteps) * dir; };
    const auto visible = [&](int k) {
        const Eigen::Vector3d X = world_to_cam.apply(point(k));
        return X.z() > 0.1 && K.contains(K.project(X), 1.0);
    };
    const int seed = std::clamp(static_cast<int>(std::lround(seed_lambda / length * kVisibilitySteps)), 0,
                                kVisibilitySteps);
    if (!visible(seed)) {
        return std::nullopt;
    }
    int lo = seed, hi = seed;
    while (lo > 0 && visible(lo - 1)) {
        --lo;
    }
    while (hi < kVisibilitySteps && visible(hi + 1)) {
        ++hi;
    }
    if (hi == lo) {
        return std::nullopt;
    }
    return Segment{point(lo), point(hi)};
}

double image_length(const Segment &seg, const Extrinsics &world_to_cam, const CameraIntrinsics &K) {
    return (K.project(world_to_cam.apply(seg.b)) - K.project(world_to_cam.apply(seg.a))).norm();
}

class LineSampler {
  public:
    LineSampler(const RigSpec &spec, std::mt19937_64 &rng) : spec_(spec), rng_(rng), to_source_(spec.truth.inverse()) {}

    SceneLine draw() {
        std::map<std::string, int> reasons;
        for (int failures = 0; failures < kMaxConsecutiveFailures; ++failures) {
            std::string why;
            if (std::optional<SceneLine> line = attempt(&why)) {
                return *line;
            }
            ++reasons[why];
        }
        const auto worst = std::max_element(reasons.begin(), reasons.end(),
                                            [](const auto &a, const auto &b) { return a.second < b.second; });
        throw Error(ErrorCode::InfeasibleSpec,
                    "no visible line after " + std::to_string(kMaxConsecutiveFailures) + " draws; most frequent "
                    "failure: " + worst->first);
    }

  private:
    Eigen::Vector3d random_point(const CameraIntrinsics &K) {
        std::uniform_real_distribution<double> u(0.0, K.width - 1.0);
        std::uniform_real_distribution<double> v(0.0, K.height - 1.0);
        std::uniform_real_distribution<double> z(spec_.scene_depth_min_m, spec_.scene_depth_max_m);
        const Eigen::Vector2d px(u(rng_), v(rng_));
        return z(rng_) * K.unproject(px);
    }

    std::optional<SceneLine> attempt(std::string *why) {
        const Eigen::Vector3d p_target = random_point(spec_.target_K);
        const Eigen::Vector3d p_source = spec_.truth.apply(random_point(spec_.source_K));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double gap = (p_source - p_target).norm();
        const double total_draw = unit(rng_);
        const double split_draw = unit(rng_);
        if (gap < 0.05) {
            *why = "seed points coincide";
            return std::nullopt;
        }
        if (gap > spec_.line_length_max_m) {
            *why = "views too far apart for line_length_max_m";
            return std::nullopt;
        }
        const double lo = std::max(spec_.line_length_min_m, gap);
        const double total = lo + (spec_.line_length_max_m - lo) * total_draw;
        const double before = (total - gap) * split_draw;

        SceneLine line;
        line.dir = (p_source - p_target) / gap;
        line.origin = p_target - before * line.dir;
        const auto target_view = visible_run(line.origin, line.dir, total, before, Extrinsics::identity(), spec_.target_K);
        const auto source_view = visible_run(line.origin, line.dir, total, before + gap, to_source_, spec_.source_K);
        if (!target_view || !source_view) {
            *why = "line not visible in both cameras";
            return std::nullopt;
        }
        if (image_length(*target_view, Extrinsics::identity(), spec_.target_K) < 10.0 ||
            image_length(*source_view, to_source_, spec_.source_K) < 10.0) {
            *why = "projected length below 10 px";
            return std::nullopt;
        }
        line.target_view = *target_view;
        line.source_view = *source_view;
        return line;
    }

    const RigSpec &spec_;
    std::mt19937_64 &rng_;
    Extrinsics to_source_;
};

class Observer {
  public:
    Observer(const RigSpec &spec, std::mt19937_64 &rng) : spec_(spec), rng_(rng), to_source_(spec.truth.inverse()) {}

    Line2D image_segment(const Segment &seg, const Extrinsics &world_to_cam, const CameraIntrinsics &K) {
        std::normal_distribution<double> noise(0.0, 1.0);
        Eigen::Vector2d x1 = K.project(world_to_cam.apply(seg.a));
        Eigen::Vector2d x2 = K.project(world_to_cam.apply(seg.b));
        const double s = spec_.pixel_noise_sigma;
        x1 += s * Eigen::Vector2d(noise(rng_), noise(rng_));
        x2 += s * Eigen::Vector2d(noise(rng_), noise(rng_));
        return Line2D::from_endpoints(x1, x2);
    }

    std::vector<Eigen::Vector3d> samples(const Segment &seg, const Extrinsics &world_to_cam) {
        std::normal_distribution<double> noise(0.0, 1.0);
        const int n = spec_.samples_per_line;
        std::vector<Eigen::Vector3d> out;
        out.reserve(n);
        for (int i = 0; i < n; ++i) {
            const double lambda = static_cast<double>(i) / (n - 1);
            Eigen::Vector3d X = world_to_cam.apply(seg.a + lambda * (seg.b - seg.a));
            if (spec_.axial_depth_noise) {
                X += spec_.depth_noise_sigma * X.z() * X.z() * noise(rng_) * X.normalized();
            } else {
                X += spec_.depth_noise_sigma * Eigen::Vector3d(noise(rng_), noise(rng_), noise(rng_));
            }
            out.push_back(X);
        }
        return out;
    }

    const Extrinsics &to_source() const { return to_source_; }

  private:
    const RigSpec &spec_;
    std::mt19937_64 &rng_;
    Extrinsics to_source_;
};

std::vector<bool> pick_exact(int n, int count, std::mt19937_64 &rng) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
        order[i] = i;
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> chosen(n, false);
    for (int i = 0; i < count; ++i) {
        chosen[order[i]] = true;
    }
    return chosen;
}

} // namespace

SimulatedStream generate(const RigSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.rng_seed);
    LineSampler sampler(spec, rng);
    Observer observer(spec, rng);

    const int n = spec.n_lines;
    const std::vector<bool> outlier = pick_exact(n, static_cast<int>(std::floor(spec.outlier_fraction * n)), rng);
    const std::vector<bool> pnl = pick_exact(n, static_cast<int>(std::floor(spec.pnl_fraction * n)), rng);

    SimulatedStream out;
    out.target_K = spec.target_K;
    out.source_K = spec.source_K;
    out.truth = spec.truth;
    for (int i = 0; i < n; ++i) {
        const SceneLine source_line = sampler.draw();
        // A mismatched pair sees a different physical line in the target camera.
        const SceneLine target_line = outlier[i] ? sampler.draw() : source_line;

        LineObservation obs;
        obs.id = i;
        obs.target_2d = observer.image_segment(target_line.target_view, Extrinsics::identity(), spec.target_K);
        obs.source_2d = observer.image_segment(source_line.source_view, observer.to_source(), spec.source_K);
        obs.source_samples = observer.samples(source_line.source_view, observer.to_source());
        std::vector<Eigen::Vector3d> target_samples = observer.samples(target_line.target_view, Extrinsics::identity());
        if (!pnl[i]) {
            obs.target_samples = std::move(target_samples);
        }
        out.observations.push_back(std::move(obs));

        GroundTruthRecord rec;
        rec.id = i;
        rec.target_frame_line = plucker_from_points(source_line.origin, source_line.origin + source_line.dir);
        rec.inlier = !outlier[i];
        rec.intent = pnl[i] ? CaseKind::PnL : CaseKind::Full3D;
        out.ground_truth.push_back(rec);
    }
    return out;
}

namespace {

SweepCell run_cell(const RigSpec &base, const PipelineConfig &cfg, double rotation, double baseline, int seed,
                   std::uint64_t salt) {
    SweepCell cell;
    cell.rotation_deg = rotation;
    cell.baseline_m = baseline;
    cell.seed = seed;
    RigSpec spec = base;
    spec.truth = rig_extrinsics(rotation, baseline);
    spec.rng_seed = mix_seed(base.rng_seed, salt);
    PipelineConfig run_cfg = cfg;
    run_cfg.rng_seed = mix_seed(cfg.rng_seed, salt);
    try {
        const SimulatedStream stream = generate(spec);
        const CalibrationReport rep = run(stream.observations, stream.target_K, stream.source_K, run_cfg);
        cell.converged = rep.termination == Termination::Converged;
        cell.has_pose = rep.has_pose;
        cell.estimate = rep.extrinsics;
        if (rep.has_pose) {
            cell.rot_err_deg = rotation_error_deg(rep.extrinsics.R, spec.truth.R);
            cell.trans_err_mm = 1000.0 * (rep.extrinsics.t - spec.truth.t).norm();
        } else {
            cell.rot_err_deg = std::numeric_limits<double>::quiet_NaN();
            cell.trans_err_mm = std::numeric_limits<double>::quiet_NaN();
            cell.error = std::string("no pose: ") + to_string(rep.termination);
        }
    } catch (const Error &e) {
        cell.rot_err_deg = std::numeric_limits<double>::quiet_NaN();
        cell.trans_err_mm = std::numeric_limits<double>::quiet_NaN();
        cell.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    return cell;
}

} // namespace

SweepResult sweep(const RigSpec &base, std::span<const double> rotations_deg, std::span<const double> baselines_m,
                  int seeds_per_cell, const PipelineConfig &cfg) {
    if (rotations_deg.empty() || baselines_m.empty() || seeds_per_cell <= 0) {
        throw Error(ErrorCode::InvalidInput, "sweep grids must be non-empty");
    }
    const size_t nr = rotations_deg.size(), nb = baselines_m.size(), ns = static_cast<size_t>(seeds_per_cell);
    SweepResult result;
    result.cells.resize(nr * nb * ns);

    // Cells are independent; each worker writes only its own slot.
    std::atomic<size_t> next{0};
    const auto worker = [&]() {
        for (size_t idx = next++; idx < result.cells.size(); idx = next++) {
            const size_t ri = idx / (nb * ns), bi = (idx / ns) % nb, si = idx % ns;
            result.cells[idx] = run_cell(base, cfg, rotations_deg[ri], baselines_m[bi], static_cast<int>(si), idx);
        }
    };
    const unsigned n_threads = std::clamp(std::thread::hardware_concurrency(), 1u, 16u);
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_threads; ++i) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto &t : pool) {
        t.join();
    }

    const auto cell_at = [&](size_t ri, size_t bi, size_t si) -> const SweepCell & {
        return result.cells[(ri * nb + bi) * ns + si];
    };
    const auto step_error = [&](const SweepCell &a, const SweepCell &b, bool rotation_step) -> std::optional<double> {
        if (!a.has_pose || !b.has_pose) {
            return std::nullopt;
        }
        const Extrinsics poses[2] = {a.estimate, b.estimate};
        const double step_rot = b.rotation_deg - a.rotation_deg;
        const double step_cm = 100.0 * (b.baseline_m - a.baseline_m);
        try {
            const PoseVariationErrors e = pose_variation_errors(poses, step_rot, step_cm);
            return rotation_step ? e.rotation_deg[0] : e.translation_cm[0];
        } catch (const Error &) {
            return std::nullopt;
        }
    };
    for (size_t bi = 0; bi < nb; ++bi) {
        for (size_t ri = 0; ri + 1 < nr; ++ri) {
            StepError step{true, baselines_m[bi], rotations_deg[ri], rotations_deg[ri + 1], 0.0, 0};
            for (size_t si = 0; si < ns; ++si) {
                if (const auto e = step_error(cell_at(ri, bi, si), cell_at(ri + 1, bi, si), true)) {
                    step.mean_error += *e;
                    ++step.samples;
                }
            }
            step.mean_error = step.samples ? step.mean_error / step.samples : std::numeric_limits<double>::quiet_NaN();
            result.steps.push_back(step);
        }
    }
    for (size_t ri = 0; ri < nr; ++ri) {
        for (size_t bi = 0; bi + 1 < nb; ++bi) {
            StepError step{false, rotations_deg[ri], baselines_m[bi], baselines_m[bi + 1], 0.0, 0};
            for (size_t si = 0; si < ns; ++si) {
                if (const auto e = step_error(cell_at(ri, bi, si), cell_at(ri, bi + 1, si), false)) {
                    step.mean_error += *e;
                    ++step.samples;
                }
            }
            step.mean_error = step.samples ? step.mean_error / step.samples : std::numeric_limits<double>::quiet_NaN();
            result.steps.push_back(step);
        }
    }
    return result;
}

} // namespace pelical
