// Command-line driver: simulate, sweep, calibrate, evaluate-planes, pose-errors.
// Exit codes: 0 converged / success, 1 I/O or schema error, 2 calibration did not converge or the
// simulation spec is infeasible.

#include "pelical/io.h"
#include "pelical/metrics.h"
#include "pelical/pipeline.h"
#include "pelical/simulator.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace pelical;

namespace {

struct SeedFlag {
    std::optional<std::uint64_t> value;
};

// Flags < config file < PELICAL_SEED.
std::optional<std::uint64_t> env_seed() {
    const char *s = std::getenv("PELICAL_SEED");
    if (!s || !*s) {
        return std::nullopt;
    }
    char *end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (*end != '\0') {
        throw Error(ErrorCode::Schema, std::string("PELICAL_SEED: not an unsigned integer: ") + s);
    }
    return v;
}

void emit(const std::string &path, const std::string &text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

std::vector<double> parse_list(const std::string &csv, const char *what) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= csv.size()) {
        const size_t next = csv.find(',', pos);
        const std::string item = csv.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        char *end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') {
            throw Error(ErrorCode::Schema, std::string(what) + ": bad number '" + item + "'");
        }
        out.push_back(v);
        if (next == std::string::npos) {
            break;
        }
        pos = next + 1;
    }
    return out;
}

struct PipelineFlags {
    std::string config_path;
    std::optional<double> epsilon_d;
    std::optional<double> cost_threshold;
    std::optional<int> max_pairs;
    SeedFlag seed;

    void add(CLI::App *app) {
        app->add_option("--config", config_path, "pipeline config JSON; its keys override flags");
        app->add_option("--epsilon-d", epsilon_d, "voting distance in metres (default 0.02)");
        app->add_option("--cost-threshold", cost_threshold, "mean px^2-equivalent cost per line (default 2.0)");
        app->add_option("--max-pairs", max_pairs, "observation cap (default 200)");
        app->add_option("--seed", seed.value, "rng seed; PELICAL_SEED overrides");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (epsilon_d) {
            cfg.epsilon_d_m = *epsilon_d;
        }
        if (cost_threshold) {
            cfg.cost_threshold = *cost_threshold;
        }
        if (max_pairs) {
            cfg.max_pairs = *max_pairs;
        }
        if (seed.value) {
            cfg.rng_seed = *seed.value;
        }
        if (!config_path.empty()) {
            cfg = parse_pipeline_config(read_text_file(config_path), cfg);
        }
        if (const auto s = env_seed()) {
            cfg.rng_seed = *s;
        }
        cfg.validate();
        return cfg;
    }
};

struct RigFlags {
    std::string spec_path;
    std::optional<double> rotation_deg;
    std::optional<double> baseline_m;
    std::optional<int> n_lines;
    std::optional<double> pixel_noise;
    std::optional<double> depth_noise;
    std::optional<double> outliers;
    SeedFlag seed;

    void add(CLI::App *app) {
        app->add_option("--spec", spec_path, "rig spec JSON; its keys override flags");
        app->add_option("--rotation-deg", rotation_deg, "yaw of the source camera about y");
        app->add_option("--baseline-m", baseline_m, "source offset along x");
        app->add_option("--lines", n_lines, "observations per stream");
        app->add_option("--pixel-noise", pixel_noise, "endpoint noise sigma in px");
        app->add_option("--depth-noise", depth_noise, "3D sample noise sigma in m");
        app->add_option("--outliers", outliers, "fraction of mismatched pairs");
        app->add_option("--seed", seed.value, "rng seed; PELICAL_SEED overrides");
    }

    RigSpec resolve() const {
        RigSpec spec = default_rig_spec();
        if (rotation_deg || baseline_m) {
            spec.truth = rig_extrinsics(rotation_deg.value_or(20.0), baseline_m.value_or(0.30));
        }
        if (n_lines) {
            spec.n_lines = *n_lines;
        }
        if (pixel_noise) {
            spec.pixel_noise_sigma = *pixel_noise;
        }
        if (depth_noise) {
            spec.depth_noise_sigma = *depth_noise;
        }
        if (outliers) {
            spec.outlier_fraction = *outliers;
        }
        if (seed.value) {
            spec.rng_seed = *seed.value;
        }
        if (!spec_path.empty()) {
            spec = parse_rig_spec(read_text_file(spec_path), spec);
        }
        if (const auto s = env_seed()) {
            spec.rng_seed = *s;
        }
        spec.validate();
        return spec;
    }
};

int exit_for(const Error &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::InfeasibleSpec ? 2 : 1;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Extrinsic calibration of two RGB-D cameras from matched line features"};
    app.require_subcommand(1);

    // simulate
    CLI::App *sim = app.add_subcommand("simulate", "generate a synthetic observation stream");
    RigFlags sim_rig;
    std::string sim_out, sim_truth;
    sim_rig.add(sim);
    sim->add_option("--output", sim_out, "observation file (stdout when omitted)");
    sim->add_option("--truth", sim_truth, "ground-truth file");

    // sweep
    CLI::App *swp = app.add_subcommand("sweep", "rotation x baseline Monte-Carlo grid");
    RigFlags swp_rig;
    PipelineFlags swp_pipe;
    std::string rotations = "0,20,40,60,80", baselines = "0.20,0.25,0.30,0.35,0.40,0.45";
    int seeds_per_cell = 10;
    std::string swp_out, swp_steps;
    swp->add_option("--spec", swp_rig.spec_path, "rig spec JSON (noise, lines, seed)");
    swp->add_option("--lines", swp_rig.n_lines, "observations per stream");
    swp->add_option("--pixel-noise", swp_rig.pixel_noise, "endpoint noise sigma in px");
    swp->add_option("--depth-noise", swp_rig.depth_noise, "3D sample noise sigma in m");
    swp->add_option("--outliers", swp_rig.outliers, "fraction of mismatched pairs");
    swp->add_option("--rotations", rotations, "comma-separated rotation angles in degrees");
    swp->add_option("--baselines", baselines, "comma-separated baselines in metres");
    swp->add_option("--seeds-per-cell", seeds_per_cell, "streams per grid cell")->check(CLI::PositiveNumber);
    swp->add_option("--output", swp_out, "per-run CSV (stdout when omitted)");
    swp->add_option("--steps", swp_steps, "step-error CSV");
    swp_pipe.add(swp);

    // calibrate
    CLI::App *cal = app.add_subcommand("calibrate", "estimate the extrinsics from an observation file");
    PipelineFlags cal_pipe;
    std::string cal_in, cal_out;
    cal->add_option("--input", cal_in, "observation file")->required();
    cal->add_option("--output", cal_out, "calibration file (stdout when omitted)");
    cal_pipe.add(cal);

    // evaluate-planes
    CLI::App *pln = app.add_subcommand("evaluate-planes", "board plane merge metrics (l, d, theta)");
    std::string pln_in, pln_calib, pln_truth, pln_out;
    double square_mm = 108.0;
    pln->add_option("--input", pln_in, "plane point sets JSON")->required();
    auto *calib_opt = pln->add_option("--calibration", pln_calib, "calibration file with the pose to evaluate");
    pln->add_option("--truth", pln_truth, "truth file instead of a calibration file")->excludes(calib_opt);
    pln->add_option("--square-mm", square_mm, "board square size in mm")->check(CLI::PositiveNumber);
    pln->add_option("--output", pln_out, "metrics JSON (stdout when omitted)");

    // pose-errors
    CLI::App *pse = app.add_subcommand(
        "pose-errors", "step errors between consecutive poses; Euler angles are intrinsic XYZ (roll, pitch, yaw) "
                       "with the varied angle in the middle, valid for |pitch| < 85 deg");
    std::string pse_in, pse_out;
    double step_rot = 20.0, step_cm = 5.0;
    pse->add_option("--input", pse_in, "pose groups JSON")->required();
    pse->add_option("--step-deg", step_rot, "nominal rotation step");
    pse->add_option("--step-cm", step_cm, "nominal translation step");
    pse->add_option("--output", pse_out, "error JSON (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*sim) {
            const SimulatedStream s = generate(sim_rig.resolve());
            emit(sim_out, format_observation_file({s.target_K, s.source_K, s.observations}));
            if (!sim_truth.empty()) {
                write_text_file(sim_truth, format_truth_file(s));
            }
            return 0;
        }
        if (*swp) {
            const RigSpec base = swp_rig.resolve();
            const PipelineConfig cfg = swp_pipe.resolve();
            const std::vector<double> rots = parse_list(rotations, "--rotations");
            const std::vector<double> bases = parse_list(baselines, "--baselines");
            const SweepResult result = sweep(base, rots, bases, seeds_per_cell, cfg);
            emit(swp_out, format_sweep_csv(result));
            if (!swp_steps.empty()) {
                write_text_file(swp_steps, format_step_csv(result));
            }
            return 0;
        }
        if (*cal) {
            const PipelineConfig cfg = cal_pipe.resolve();
            const ObservationFile obs = parse_observation_file(read_text_file(cal_in));
            if (obs.observations.empty()) {
                throw Error(ErrorCode::Schema, "observations: empty stream");
            }
            const CalibrationReport rep = run(obs.observations, obs.target_K, obs.source_K, cfg);
            emit(cal_out, format_calibration_file(calibration_file_from_report(rep)));
            if (rep.termination != Termination::Converged) {
                std::fprintf(stderr, "not converged: %s\n", to_string(rep.termination));
                return 2;
            }
            return 0;
        }
        if (*pln) {
            if (pln_calib.empty() && pln_truth.empty()) {
                throw Error(ErrorCode::Schema, "evaluate-planes needs --calibration or --truth");
            }
            const Extrinsics T = pln_calib.empty() ? parse_truth_extrinsics(read_text_file(pln_truth))
                                                   : parse_calibration_file(read_text_file(pln_calib)).extrinsics;
            const PlaneMergeInput in = parse_plane_merge_input(read_text_file(pln_in));
            emit(pln_out, format_plane_merge_metrics(plane_merge_metrics(in, T, square_mm)));
            return 0;
        }
        if (*pse) {
            const PoseGroups groups = parse_pose_groups(read_text_file(pse_in));
            std::vector<PoseVariationErrors> rot, trans;
            for (const auto &g : groups.rotation_groups) {
                rot.push_back(pose_variation_errors(g, step_rot, step_cm));
            }
            for (const auto &g : groups.translation_groups) {
                trans.push_back(pose_variation_errors(g, step_rot, step_cm));
            }
            emit(pse_out, format_pose_errors(rot, trans));
            return 0;
        }
    } catch (const Error &e) {
        return exit_for(e);
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
