#include "pelical/io.h"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <limits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pelical {

using Json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string &path, const std::string &what) {
    throw Error(ErrorCode::Schema, (path.empty() ? std::string("document") : path) + ": " + what);
}

Json parse_text(const std::string &text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::Schema, "malformed JSON at byte " + std::to_string(e.byte));
    }
}

std::string join(const std::string &path, const std::string &key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string &path, size_t i) { return path + "[" + std::to_string(i) + "]"; }

const Json &field(const Json &j, const std::string &key, const std::string &path) {
    if (!j.is_object()) {
        schema_error(path, "expected an object");
    }
    auto it = j.find(key);
    if (it == j.end()) {
        schema_error(join(path, key), "missing field");
    }
    return *it;
}

const Json *optional_field(const Json &j, const std::string &key, const std::string &path) {
    if (!j.is_object()) {
        schema_error(path, "expected an object");
    }
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
}

double as_number(const Json &j, const std::string &path) {
    if (!j.is_number()) {
        schema_error(path, "expected a number");
    }
    return j.get<double>();
}

int as_int(const Json &j, const std::string &path) {
    if (!j.is_number_integer()) {
        schema_error(path, "expected an integer");
    }
    return j.get<int>();
}

template <int N> Eigen::Matrix<double, N, 1> as_vec(const Json &j, const std::string &path) {
    if (!j.is_array() || j.size() != N) {
        schema_error(path, "expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
        v(i) = as_number(j[i], index(path, i));
    }
    return v;
}

std::vector<Eigen::Vector3d> as_points(const Json &j, const std::string &path) {
    if (!j.is_array()) {
        schema_error(path, "expected an array of points");
    }
    std::vector<Eigen::Vector3d> out;
    out.reserve(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_vec<3>(j[i], index(path, i)));
    }
    return out;
}

Eigen::Matrix3d as_rotation(const Json &j, const std::string &path) {
    if (!j.is_array() || j.size() != 3) {
        schema_error(path, "expected a 3x3 row-major matrix");
    }
    Eigen::Matrix3d R;
    for (int r = 0; r < 3; ++r) {
        R.row(r) = as_vec<3>(j[r], index(path, r)).transpose();
    }
    if (!Extrinsics{R, Eigen::Vector3d::Zero()}.is_valid(1e-9)) {
        schema_error(path, "rotation is not orthonormal within 1e-9");
    }
    return R;
}

Json vec_json(const Eigen::Ref<const Eigen::VectorXd> &v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

Json rotation_json(const Eigen::Matrix3d &R) {
    Json a = Json::array();
    for (int r = 0; r < 3; ++r) {
        a.push_back(vec_json(R.row(r).transpose()));
    }
    return a;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json intrinsics_json(const CameraIntrinsics &K) {
    Json j = Json::object();
    j["fx"] = K.fx;
    j["fy"] = K.fy;
    j["cx"] = K.cx;
    j["cy"] = K.cy;
    j["width"] = K.width;
    j["height"] = K.height;
    return j;
}

CameraIntrinsics parse_intrinsics(const Json &j, const std::string &path) {
    CameraIntrinsics K;
    K.fx = as_number(field(j, "fx", path), join(path, "fx"));
    K.fy = as_number(field(j, "fy", path), join(path, "fy"));
    K.cx = as_number(field(j, "cx", path), join(path, "cx"));
    K.cy = as_number(field(j, "cy", path), join(path, "cy"));
    K.width = as_int(field(j, "width", path), join(path, "width"));
    K.height = as_int(field(j, "height", path), join(path, "height"));
    try {
        K.validate();
    } catch (const Error &e) {
        schema_error(path, e.what());
    }
    return K;
}

Json extrinsics_json(const Extrinsics &T) {
    Json j = Json::object();
    j["rotation"] = rotation_json(T.R);
    j["translation_m"] = vec_json(T.t);
    return j;
}

Extrinsics parse_extrinsics(const Json &j, const std::string &path) {
    Extrinsics T;
    T.R = as_rotation(field(j, "rotation", path), join(path, "rotation"));
    T.t = as_vec<3>(field(j, "translation_m", path), join(path, "translation_m"));
    return T;
}

Line2D parse_line2d(const Json &j, const std::string &path) {
    const std::string ep = join(path, "endpoints");
    const Json &e = field(j, "endpoints", path);
    if (!e.is_array() || e.size() != 2) {
        schema_error(ep, "expected an array of 2 points");
    }
    try {
        return Line2D::from_endpoints(as_vec<2>(e[0], index(ep, 0)), as_vec<2>(e[1], index(ep, 1)));
    } catch (const Error &err) {
        schema_error(ep, err.what());
    }
}

Json line2d_json(const Line2D &l) {
    Json e = Json::array();
    e.push_back(vec_json(l.endpoints[0]));
    e.push_back(vec_json(l.endpoints[1]));
    Json j = Json::object();
    j["endpoints"] = e;
    return j;
}

Json points_json(const std::vector<Eigen::Vector3d> &pts) {
    Json a = Json::array();
    for (const Eigen::Vector3d &p : pts) {
        a.push_back(vec_json(p));
    }
    return a;
}

void append_number(std::string &out, double v) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void dump(const Json &j, int depth, std::string &out) {
    const std::string pad(2 * (depth + 1), ' ');
    const std::string close(2 * depth, ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) {
                out += ",\n";
            }
            first = false;
            out += pad + Json(it.key()).dump() + ": ";
            dump(it.value(), depth + 1, out);
        }
        out += "\n" + close + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        const bool flat = std::none_of(j.begin(), j.end(), [](const Json &e) { return e.is_structured(); });
        if (flat) {
            out += "[";
            for (size_t i = 0; i < j.size(); ++i) {
                if (i) {
                    out += ", ";
                }
                dump(j[i], depth + 1, out);
            }
            out += "]";
            return;
        }
        out += "[\n";
        for (size_t i = 0; i < j.size(); ++i) {
            if (i) {
                out += ",\n";
            }
            out += pad;
            dump(j[i], depth + 1, out);
        }
        out += "\n" + close + "]";
        return;
    }
    case Json::value_t::number_float:
        append_number(out, j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

std::string canonical(const Json &j) {
    std::string out;
    dump(j, 0, out);
    out += "\n";
    return out;
}

Termination parse_termination(const Json &j, const std::string &path) {
    if (j.is_string()) {
        for (Termination t : {Termination::Converged, Termination::MaxPairs, Termination::Aborted}) {
            if (j.get<std::string>() == to_string(t)) {
                return t;
            }
        }
    }
    schema_error(path, "expected one of Converged, MaxPairs, Aborted");
}

double number_or_nan(const Json *j, const std::string &path) {
    return j ? as_number(*j, path) : std::numeric_limits<double>::quiet_NaN();
}

void check_keys(const Json &j, const std::string &path, std::initializer_list<const char *> allowed) {
    if (!j.is_object()) {
        schema_error(path, "expected an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char *k : allowed) {
            known = known || it.key() == k;
        }
        if (!known) {
            schema_error(join(path, it.key()), "unknown field");
        }
    }
}

std::string csv_number(double v) {
    std::string s;
    append_number(s, v);
    return s == "null" ? "nan" : s;
}

} // namespace

ObservationFile parse_observation_file(const std::string &text) {
    const Json doc = parse_text(text);
    ObservationFile f;
    f.target_K = parse_intrinsics(field(doc, "target_intrinsics", ""), "target_intrinsics");
    f.source_K = parse_intrinsics(field(doc, "source_intrinsics", ""), "source_intrinsics");
    const Json &obs = field(doc, "observations", "");
    if (!obs.is_array()) {
        schema_error("observations", "expected an array");
    }
    for (size_t i = 0; i < obs.size(); ++i) {
        const std::string p = index("observations", i);
        const Json &o = obs[i];
        LineObservation lo;
        lo.id = as_int(field(o, "id", p), join(p, "id"));
        lo.target_2d = parse_line2d(field(o, "target_2d", p), join(p, "target_2d"));
        lo.source_2d = parse_line2d(field(o, "source_2d", p), join(p, "source_2d"));
        if (const Json *ts = optional_field(o, "target_samples", p)) {
            lo.target_samples = as_points(*ts, join(p, "target_samples"));
            if (lo.target_samples->size() < 2) {
                schema_error(join(p, "target_samples"), "needs at least 2 samples");
            }
        }
        lo.source_samples = as_points(field(o, "source_samples", p), join(p, "source_samples"));
        if (lo.source_samples.size() < 2) {
            schema_error(join(p, "source_samples"), "needs at least 2 samples");
        }
        f.observations.push_back(std::move(lo));
    }
    return f;
}

std::string format_observation_file(const ObservationFile &file) {
    Json doc = Json::object();
    doc["target_intrinsics"] = intrinsics_json(file.target_K);
    doc["source_intrinsics"] = intrinsics_json(file.source_K);
    Json obs = Json::array();
    for (const LineObservation &o : file.observations) {
        Json j = Json::object();
        j["id"] = o.id;
        j["target_2d"] = line2d_json(o.target_2d);
        j["source_2d"] = line2d_json(o.source_2d);
        j["target_samples"] = o.target_samples ? points_json(*o.target_samples) : Json(nullptr);
        j["source_samples"] = points_json(o.source_samples);
        obs.push_back(std::move(j));
    }
    doc["observations"] = std::move(obs);
    return canonical(doc);
}

CalibrationFile calibration_file_from_report(const CalibrationReport &report) {
    CalibrationFile f;
    f.extrinsics = report.extrinsics;
    f.extrinsics.R = orthonormalize(report.extrinsics.R);
    try {
        f.cgr = rotation_to_cgr(f.extrinsics.R);
    } catch (const Error &) {
        f.cgr.reset();
    }
    f.final_cost = report.final_cost;
    f.termination = report.termination;
    f.has_pose = report.has_pose;
    f.accepted_pair_count = report.accepted_pair_count;
    f.voting_inlier_count = report.voting_inlier_count;
    f.inlier_ids = report.inlier_ids;
    f.trace = report.trace;
    return f;
}

CalibrationFile parse_calibration_file(const std::string &text) {
    const Json doc = parse_text(text);
    CalibrationFile f;
    f.extrinsics.R = as_rotation(field(doc, "rotation", ""), "rotation");
    f.extrinsics.t = as_vec<3>(field(doc, "translation_m", ""), "translation_m");
    if (const Json *s = optional_field(doc, "cgr", "")) {
        f.cgr = as_vec<3>(*s, "cgr");
    }
    f.final_cost = number_or_nan(optional_field(doc, "final_cost", ""), "final_cost");
    f.termination = parse_termination(field(doc, "termination", ""), "termination");
    if (const Json *v = optional_field(doc, "has_pose", "")) {
        if (!v->is_boolean()) {
            schema_error("has_pose", "expected a boolean");
        }
        f.has_pose = v->get<bool>();
    }
    if (const Json *v = optional_field(doc, "accepted_pair_count", "")) {
        f.accepted_pair_count = as_int(*v, "accepted_pair_count");
    }
    if (const Json *v = optional_field(doc, "voting_inlier_count", "")) {
        f.voting_inlier_count = as_int(*v, "voting_inlier_count");
    }
    if (const Json *v = optional_field(doc, "inlier_ids", "")) {
        if (!v->is_array()) {
            schema_error("inlier_ids", "expected an array");
        }
        for (size_t i = 0; i < v->size(); ++i) {
            f.inlier_ids.push_back(as_int((*v)[i], index("inlier_ids", i)));
        }
    }
    if (const Json *tr = optional_field(doc, "trace", "")) {
        if (!tr->is_array()) {
            schema_error("trace", "expected an array");
        }
        for (size_t i = 0; i < tr->size(); ++i) {
            const std::string p = index("trace", i);
            const Json &e = (*tr)[i];
            TraceEntry t;
            t.observations = as_int(field(e, "observations", p), join(p, "observations"));
            t.accepted_pairs = as_int(field(e, "accepted_pairs", p), join(p, "accepted_pairs"));
            t.so3_distance = number_or_nan(optional_field(e, "so3_distance", p), join(p, "so3_distance"));
            t.vote_size = as_int(field(e, "vote_size", p), join(p, "vote_size"));
            const Json &vc = field(e, "vote_converged", p);
            if (!vc.is_boolean()) {
                schema_error(join(p, "vote_converged"), "expected a boolean");
            }
            t.vote_converged = vc.get<bool>();
            t.cost = number_or_nan(optional_field(e, "cost", p), join(p, "cost"));
            if (const Json *n = optional_field(e, "note", p)) {
                if (!n->is_string()) {
                    schema_error(join(p, "note"), "expected a string");
                }
                t.note = n->get<std::string>();
            }
            f.trace.push_back(std::move(t));
        }
    }
    return f;
}

std::string format_calibration_file(const CalibrationFile &file) {
    if (!file.extrinsics.is_valid(1e-9)) {
        throw Error(ErrorCode::Schema, "rotation: refusing to write a non-orthonormal rotation");
    }
    Json doc = Json::object();
    doc["rotation"] = rotation_json(file.extrinsics.R);
    doc["translation_m"] = vec_json(file.extrinsics.t);
    doc["cgr"] = file.cgr ? vec_json(*file.cgr) : Json(nullptr);
    doc["final_cost"] = number_or_null(file.final_cost);
    doc["termination"] = to_string(file.termination);
    doc["has_pose"] = file.has_pose;
    doc["accepted_pair_count"] = file.accepted_pair_count;
    doc["voting_inlier_count"] = file.voting_inlier_count;
    doc["inlier_ids"] = file.inlier_ids;
    Json trace = Json::array();
    for (const TraceEntry &t : file.trace) {
        Json e = Json::object();
        e["observations"] = t.observations;
        e["accepted_pairs"] = t.accepted_pairs;
        e["so3_distance"] = number_or_null(t.so3_distance);
        e["vote_size"] = t.vote_size;
        e["vote_converged"] = t.vote_converged;
        e["cost"] = number_or_null(t.cost);
        e["note"] = t.note;
        trace.push_back(std::move(e));
    }
    doc["trace"] = std::move(trace);
    return canonical(doc);
}

RigSpec parse_rig_spec(const std::string &text, const RigSpec &base) {
    const Json doc = parse_text(text);
    check_keys(doc, "",
               {"rotation_deg", "baseline_m", "truth", "target_intrinsics", "source_intrinsics", "n_lines",
                "line_length_m", "scene_depth_m", "pixel_noise_sigma", "depth_noise_sigma", "axial_depth_noise",
                "outlier_fraction", "samples_per_line", "pnl_fraction", "rng_seed"});
    RigSpec spec = base;
    const Json *rot = optional_field(doc, "rotation_deg", "");
    const Json *bl = optional_field(doc, "baseline_m", "");
    if (rot || bl) {
        spec.truth = rig_extrinsics(rot ? as_number(*rot, "rotation_deg") : 20.0,
                                    bl ? as_number(*bl, "baseline_m") : 0.30);
    }
    if (const Json *v = optional_field(doc, "truth", "")) {
        spec.truth = parse_extrinsics(*v, "truth");
    }
    if (const Json *v = optional_field(doc, "target_intrinsics", "")) {
        spec.target_K = parse_intrinsics(*v, "target_intrinsics");
    }
    if (const Json *v = optional_field(doc, "source_intrinsics", "")) {
        spec.source_K = parse_intrinsics(*v, "source_intrinsics");
    }
    if (const Json *v = optional_field(doc, "n_lines", "")) {
        spec.n_lines = as_int(*v, "n_lines");
    }
    if (const Json *v = optional_field(doc, "line_length_m", "")) {
        const Eigen::Vector2d r = as_vec<2>(*v, "line_length_m");
        spec.line_length_min_m = r(0);
        spec.line_length_max_m = r(1);
    }
    if (const Json *v = optional_field(doc, "scene_depth_m", "")) {
        const Eigen::Vector2d r = as_vec<2>(*v, "scene_depth_m");
        spec.scene_depth_min_m = r(0);
        spec.scene_depth_max_m = r(1);
    }
    if (const Json *v = optional_field(doc, "pixel_noise_sigma", "")) {
        spec.pixel_noise_sigma = as_number(*v, "pixel_noise_sigma");
    }
    if (const Json *v = optional_field(doc, "depth_noise_sigma", "")) {
        spec.depth_noise_sigma = as_number(*v, "depth_noise_sigma");
    }
    if (const Json *v = optional_field(doc, "axial_depth_noise", "")) {
        if (!v->is_boolean()) {
            schema_error("axial_depth_noise", "expected a boolean");
        }
        spec.axial_depth_noise = v->get<bool>();
    }
    if (const Json *v = optional_field(doc, "outlier_fraction", "")) {
        spec.outlier_fraction = as_number(*v, "outlier_fraction");
    }
    if (const Json *v = optional_field(doc, "samples_per_line", "")) {
        spec.samples_per_line = as_int(*v, "samples_per_line");
    }
    if (const Json *v = optional_field(doc, "pnl_fraction", "")) {
        spec.pnl_fraction = as_number(*v, "pnl_fraction");
    }
    if (const Json *v = optional_field(doc, "rng_seed", "")) {
        if (!v->is_number_unsigned()) {
            schema_error("rng_seed", "expected a non-negative integer");
        }
        spec.rng_seed = v->get<std::uint64_t>();
    }
    try {
        spec.validate();
    } catch (const Error &e) {
        schema_error("", e.what());
    }
    return spec;
}

std::string format_rig_spec(const RigSpec &spec) {
    Json doc = Json::object();
    doc["truth"] = extrinsics_json(spec.truth);
    doc["target_intrinsics"] = intrinsics_json(spec.target_K);
    doc["source_intrinsics"] = intrinsics_json(spec.source_K);
    doc["n_lines"] = spec.n_lines;
    doc["line_length_m"] = {spec.line_length_min_m, spec.line_length_max_m};
    doc["scene_depth_m"] = {spec.scene_depth_min_m, spec.scene_depth_max_m};
    doc["pixel_noise_sigma"] = spec.pixel_noise_sigma;
    doc["depth_noise_sigma"] = spec.depth_noise_sigma;
    doc["axial_depth_noise"] = spec.axial_depth_noise;
    doc["outlier_fraction"] = spec.outlier_fraction;
    doc["samples_per_line"] = spec.samples_per_line;
    doc["pnl_fraction"] = spec.pnl_fraction;
    doc["rng_seed"] = spec.rng_seed;
    return canonical(doc);
}

PipelineConfig parse_pipeline_config(const std::string &text, const PipelineConfig &base) {
    const Json doc = parse_text(text);
    check_keys(doc, "",
               {"inlier_ratio_threshold", "ransac", "epsilon_d_m", "vote_threshold", "cost_threshold", "max_pairs",
                "rng_seed", "min_pairs_for_finalize", "gate_prune_factor", "bootstrap_window",
                "bootstrap_angle_deg", "solver"});
    PipelineConfig cfg = base;
    const auto num = [&](const Json &obj, const std::string &path, const char *key, double &dst) {
        if (const Json *v = optional_field(obj, key, path)) {
            dst = as_number(*v, join(path, key));
        }
    };
    const auto integer = [&](const Json &obj, const std::string &path, const char *key, int &dst) {
        if (const Json *v = optional_field(obj, key, path)) {
            dst = as_int(*v, join(path, key));
        }
    };
    num(doc, "", "inlier_ratio_threshold", cfg.inlier_ratio_threshold);
    num(doc, "", "epsilon_d_m", cfg.epsilon_d_m);
    num(doc, "", "cost_threshold", cfg.cost_threshold);
    integer(doc, "", "max_pairs", cfg.max_pairs);
    integer(doc, "", "min_pairs_for_finalize", cfg.min_pairs_for_finalize);
    num(doc, "", "gate_prune_factor", cfg.gate_prune_factor);
    integer(doc, "", "bootstrap_window", cfg.bootstrap_window);
    num(doc, "", "bootstrap_angle_deg", cfg.bootstrap_angle_deg);
    if (const Json *v = optional_field(doc, "rng_seed", "")) {
        if (!v->is_number_unsigned()) {
            schema_error("rng_seed", "expected a non-negative integer");
        }
        cfg.rng_seed = v->get<std::uint64_t>();
    }
    if (const Json *r = optional_field(doc, "ransac", "")) {
        check_keys(*r, "ransac", {"distance_threshold_m", "iterations", "min_inlier_count"});
        num(*r, "ransac", "distance_threshold_m", cfg.ransac.distance_threshold_m);
        integer(*r, "ransac", "iterations", cfg.ransac.iterations);
        integer(*r, "ransac", "min_inlier_count", cfg.ransac.min_inlier_count);
    }
    if (const Json *v = optional_field(doc, "vote_threshold", "")) {
        check_keys(*v, "vote_threshold", {"min_votes", "fraction"});
        integer(*v, "vote_threshold", "min_votes", cfg.vote_threshold.min_votes);
        num(*v, "vote_threshold", "fraction", cfg.vote_threshold.fraction);
    }
    if (const Json *s = optional_field(doc, "solver", "")) {
        check_keys(*s, "solver",
                   {"max_lm_iterations", "lm_initial_damping", "cost_tolerance", "multistart_halfwidth",
                    "multistart_points_per_axis"});
        integer(*s, "solver", "max_lm_iterations", cfg.solver.max_lm_iterations);
        num(*s, "solver", "lm_initial_damping", cfg.solver.lm_initial_damping);
        num(*s, "solver", "cost_tolerance", cfg.solver.cost_tolerance);
        num(*s, "solver", "multistart_halfwidth", cfg.solver.multistart_halfwidth);
        integer(*s, "solver", "multistart_points_per_axis", cfg.solver.multistart_points_per_axis);
    }
    try {
        cfg.validate();
    } catch (const Error &e) {
        schema_error("", e.what());
    }
    return cfg;
}

std::string format_pipeline_config(const PipelineConfig &cfg) {
    Json doc = Json::object();
    doc["inlier_ratio_threshold"] = cfg.inlier_ratio_threshold;
    doc["ransac"] = {{"distance_threshold_m", cfg.ransac.distance_threshold_m},
                     {"iterations", cfg.ransac.iterations},
                     {"min_inlier_count", cfg.ransac.min_inlier_count}};
    doc["epsilon_d_m"] = cfg.epsilon_d_m;
    doc["vote_threshold"] = {{"min_votes", cfg.vote_threshold.min_votes}, {"fraction", cfg.vote_threshold.fraction}};
    doc["cost_threshold"] = cfg.cost_threshold;
    doc["max_pairs"] = cfg.max_pairs;
    doc["rng_seed"] = cfg.rng_seed;
    doc["min_pairs_for_finalize"] = cfg.min_pairs_for_finalize;
    doc["gate_prune_factor"] = cfg.gate_prune_factor;
    doc["bootstrap_window"] = cfg.bootstrap_window;
    doc["bootstrap_angle_deg"] = cfg.bootstrap_angle_deg;
    doc["solver"] = {{"max_lm_iterations", cfg.solver.max_lm_iterations},
                     {"lm_initial_damping", cfg.solver.lm_initial_damping},
                     {"cost_tolerance", cfg.solver.cost_tolerance},
                     {"multistart_halfwidth", cfg.solver.multistart_halfwidth},
                     {"multistart_points_per_axis", cfg.solver.multistart_points_per_axis}};
    return canonical(doc);
}

std::string format_truth_file(const SimulatedStream &stream) {
    Json doc = extrinsics_json(stream.truth);
    Json records = Json::array();
    for (const GroundTruthRecord &g : stream.ground_truth) {
        Json r = Json::object();
        r["id"] = g.id;
        r["inlier"] = g.inlier;
        r["intent"] = to_string(g.intent);
        r["line_d"] = vec_json(g.target_frame_line.d);
        r["line_m"] = vec_json(g.target_frame_line.m);
        records.push_back(std::move(r));
    }
    doc["observations"] = std::move(records);
    return canonical(doc);
}

Extrinsics parse_truth_extrinsics(const std::string &text) { return parse_extrinsics(parse_text(text), ""); }

PlaneMergeInput parse_plane_merge_input(const std::string &text) {
    const Json doc = parse_text(text);
    PlaneMergeInput in;
    in.target_points = as_points(field(doc, "target_points", ""), "target_points");
    in.source_points = as_points(field(doc, "source_points", ""), "source_points");
    const auto corners = [&](const char *key) -> std::optional<std::array<Eigen::Vector3d, 2>> {
        const Json *c = optional_field(doc, key, "");
        if (!c) {
            return std::nullopt;
        }
        const std::vector<Eigen::Vector3d> pts = as_points(*c, key);
        if (pts.size() != 2) {
            schema_error(key, "expected exactly 2 corner points");
        }
        return std::array<Eigen::Vector3d, 2>{pts[0], pts[1]};
    };
    in.target_corners = corners("target_corners");
    in.source_corners = corners("source_corners");
    if (const Json *v = optional_field(doc, "squares_per_row", "")) {
        in.squares_per_row = as_int(*v, "squares_per_row");
        if (*in.squares_per_row <= 0) {
            schema_error("squares_per_row", "must be positive");
        }
    }
    return in;
}

std::string format_plane_merge_metrics(const PlaneMergeMetrics &metrics) {
    Json doc = Json::object();
    doc["l_mm"] = metrics.l_mm ? Json(*metrics.l_mm) : Json(nullptr);
    doc["d_mm"] = metrics.d_mm;
    doc["theta_deg"] = metrics.theta_deg;
    return canonical(doc);
}

PoseGroups parse_pose_groups(const std::string &text) {
    const Json doc = parse_text(text);
    check_keys(doc, "", {"rotation_groups", "translation_groups"});
    PoseGroups out;
    const auto groups = [&](const char *key, std::vector<std::vector<Extrinsics>> &dst) {
        const Json *g = optional_field(doc, key, "");
        if (!g) {
            return;
        }
        if (!g->is_array()) {
            schema_error(key, "expected an array of pose lists");
        }
        for (size_t i = 0; i < g->size(); ++i) {
            const std::string p = index(key, i);
            const Json &list = (*g)[i];
            if (!list.is_array() || list.size() < 2) {
                schema_error(p, "expected at least 2 poses");
            }
            std::vector<Extrinsics> poses;
            for (size_t k = 0; k < list.size(); ++k) {
                poses.push_back(parse_extrinsics(list[k], index(p, k)));
            }
            dst.push_back(std::move(poses));
        }
    };
    groups("rotation_groups", out.rotation_groups);
    groups("translation_groups", out.translation_groups);
    return out;
}

std::string format_pose_errors(const std::vector<PoseVariationErrors> &rotation,
                               const std::vector<PoseVariationErrors> &translation) {
    Json doc = Json::object();
    Json rot = Json::array();
    for (const PoseVariationErrors &e : rotation) {
        rot.push_back(e.rotation_deg);
    }
    Json trans = Json::array();
    for (const PoseVariationErrors &e : translation) {
        trans.push_back(e.translation_cm);
    }
    doc["rotation_step_errors_deg"] = std::move(rot);
    doc["translation_step_errors_cm"] = std::move(trans);
    return canonical(doc);
}

std::string format_sweep_csv(const SweepResult &result) {
    std::string out = "rotation_deg,baseline_m,seed,rot_err_deg,trans_err_mm,converged\n";
    for (const SweepCell &c : result.cells) {
        out += csv_number(c.rotation_deg) + "," + csv_number(c.baseline_m) + "," + std::to_string(c.seed) + ",";
        out += (c.has_pose ? csv_number(c.rot_err_deg) : std::string("nan")) + ",";
        out += (c.has_pose ? csv_number(c.trans_err_mm) : std::string("nan")) + ",";
        out += c.converged ? "1\n" : "0\n";
    }
    return out;
}

std::string format_step_csv(const SweepResult &result) {
    std::string out = "kind,fixed_value,from,to,mean_error,samples\n";
    for (const StepError &s : result.steps) {
        out += std::string(s.rotation_step ? "rotation" : "baseline") + "," + csv_number(s.fixed_value) + "," +
               csv_number(s.from) + "," + csv_number(s.to) + "," + csv_number(s.mean_error) + "," +
               std::to_string(s.samples) + "\n";
    }
    return out;
}

std::string read_text_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path);
    }
    out << text;
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for " + path);
    }
}

} // namespace pelical
