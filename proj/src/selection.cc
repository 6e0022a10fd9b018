#include "pelical/selection.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace pelical {

RotationRows rotation_rows(const Correspondence &c, const CameraIntrinsics &K_t) {
    RotationRows out;
    const Eigen::Vector3d &d_s = c.source_line.d;
    if (c.kind == CaseKind::Full3D) {
        if (!c.target_3d) {
            throw Error(ErrorCode::WrongKind, "Full3D correspondence without a target 3D line");
        }
        out.C = Eigen::Matrix<double, Eigen::Dynamic, 9>::Zero(3, 9);
        out.b = c.target_3d->line.d;
        for (int i = 0; i < 3; ++i) {
            out.C.block<1, 3>(i, 3 * i) = d_s.transpose();
        }
        return out;
    }
    // P_t = K_t [I | 0], so the first three entries of P_t' l_t are K_t' l_t.
    Eigen::Vector3d n = K_t.matrix().transpose() * c.target_line_2d.coeffs;
    n.normalize();
    out.C.resize(1, 9);
    for (int i = 0; i < 3; ++i) {
        out.C.block<1, 3>(0, 3 * i) = n(i) * d_s.transpose();
    }
    out.b = Eigen::VectorXd::Zero(1);
    return out;
}

RotationEstimate estimate_rotation(const Eigen::Matrix<double, Eigen::Dynamic, 9> &C, const Eigen::VectorXd &b) {
    RotationEstimate est;
    if (C.rows() == 0) {
        est.M.setZero();
        est.R.setIdentity();
        return est;
    }
    const Eigen::MatrixXd Cd = C;
    const Eigen::Matrix<double, 9, 1> x = Cd.completeOrthogonalDecomposition().solve(b);
    est.M = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(x.data());
    try {
        const SO3Projection proj = project_so3(est.M);
        est.R = proj.R;
        est.has_rotation = true;
        est.distance = so3_distance(proj.sigma, proj.sigma_prime);
    } catch (const Error &) {
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(est.M);
        est.R.setIdentity();
        est.distance = so3_distance(svd.singularValues(), Eigen::Vector3d::Ones());
    }
    return est;
}

namespace {

void apply_estimate(RotationGateState &state, const RotationEstimate &est) {
    state.M = est.M;
    state.R = est.R;
    state.has_rotation = est.has_rotation;
    state.current_distance = est.distance;
}

} // namespace

GateDecision gate_rotation(const RotationGateState &state, const RotationRows &new_rows) {
    RotationGateState next = state;
    const Eigen::Index old_rows = state.rows();
    const Eigen::Index added = new_rows.C.rows();
    next.C.conservativeResize(old_rows + added, Eigen::NoChange);
    next.C.bottomRows(added) = new_rows.C;
    next.b.conservativeResize(old_rows + added);
    next.b.tail(added) = new_rows.b;
    next.block_rows.push_back(added);

    const RotationEstimate est = estimate_rotation(next.C, next.b);
    apply_estimate(next, est);

    GateDecision decision;
    decision.distance = est.distance;
    decision.underdetermined = next.rows() < 9;
    // The gate is inactive until the least-squares problem is overdetermined.
    const bool bootstrap = old_rows < 9;
    decision.accept = bootstrap || est.distance < state.current_distance || est.distance <= kGateDistanceFloor;
    decision.state = decision.accept ? std::move(next) : state;
    return decision;
}

RotationGateState seed_rotation_gate(std::span<const RotationRows> blocks) {
    RotationGateState state;
    Eigen::Index total = 0;
    for (const RotationRows &r : blocks) {
        total += r.C.rows();
    }
    state.C.resize(total, 9);
    state.b.resize(total);
    Eigen::Index row = 0;
    for (const RotationRows &r : blocks) {
        state.C.middleRows(row, r.C.rows()) = r.C;
        state.b.segment(row, r.C.rows()) = r.b;
        state.block_rows.push_back(r.C.rows());
        row += r.C.rows();
    }
    if (total > 0) {
        apply_estimate(state, estimate_rotation(state.C, state.b));
    }
    return state;
}

namespace {

RotationGateState without_block(const RotationGateState &state, size_t block) {
    RotationGateState out;
    Eigen::Index begin = 0;
    for (size_t i = 0; i < block; ++i) {
        begin += state.block_rows[i];
    }
    const Eigen::Index len = state.block_rows[block];
    const Eigen::Index total = state.rows();
    out.C.resize(total - len, 9);
    out.b.resize(total - len);
    out.C.topRows(begin) = state.C.topRows(begin);
    out.C.bottomRows(total - begin - len) = state.C.bottomRows(total - begin - len);
    out.b.head(begin) = state.b.head(begin);
    out.b.tail(total - begin - len) = state.b.tail(total - begin - len);
    out.block_rows = state.block_rows;
    out.block_rows.erase(out.block_rows.begin() + static_cast<std::ptrdiff_t>(block));
    apply_estimate(out, estimate_rotation(out.C, out.b));
    return out;
}

} // namespace

std::vector<size_t> prune_rotation_gate(RotationGateState &state, double factor) {
    std::vector<size_t> removed;
    while (state.block_rows.size() >= 2 && state.current_distance > kGateDistanceFloor) {
        size_t best_block = 0;
        double best_distance = std::numeric_limits<double>::infinity();
        std::optional<RotationGateState> best;
        for (size_t i = 0; i < state.block_rows.size(); ++i) {
            if (state.rows() - state.block_rows[i] < 9) {
                continue;
            }
            RotationGateState candidate = without_block(state, i);
            if (candidate.current_distance < best_distance) {
                best_distance = candidate.current_distance;
                best_block = i;
                best = std::move(candidate);
            }
        }
        if (!best || !(best_distance < factor * state.current_distance)) {
            break;
        }
        state = std::move(*best);
        removed.push_back(best_block);
    }
    return removed;
}

double rotation_residual(const Correspondence &c, const Eigen::Matrix3d &R, const CameraIntrinsics &K_t) {
    const Eigen::Vector3d u = R * c.source_line.d;
    if (c.kind == CaseKind::Full3D) {
        if (!c.target_3d) {
            throw Error(ErrorCode::WrongKind, "Full3D correspondence without a target 3D line");
        }
        const Eigen::Vector3d &d_t = c.target_3d->line.d;
        return std::atan2(u.cross(d_t).norm(), u.dot(d_t));
    }
    const Eigen::Vector3d n = (K_t.matrix().transpose() * c.target_line_2d.coeffs).normalized();
    return std::asin(std::min(1.0, std::abs(n.dot(u)) / u.norm()));
}

std::optional<Eigen::Matrix3d> rotation_from_two_directions(const Correspondence &a, const Correspondence &b) {
    if (a.kind != CaseKind::Full3D || b.kind != CaseKind::Full3D || !a.target_3d || !b.target_3d) {
        return std::nullopt;
    }
    const Eigen::Vector3d &s1 = a.source_line.d;
    const Eigen::Vector3d &s2 = b.source_line.d;
    const Eigen::Vector3d &t1 = a.target_3d->line.d;
    const Eigen::Vector3d &t2 = b.target_3d->line.d;
    const Eigen::Vector3d s3 = s1.cross(s2);
    const Eigen::Vector3d t3 = t1.cross(t2);
    // Near-parallel directions leave the roll about them unobserved.
    if (s3.norm() < 0.1 || t3.norm() < 0.1) {
        return std::nullopt;
    }
    const Eigen::Matrix3d H = s1 * t1.transpose() + s2 * t2.transpose() + s3.normalized() * t3.normalized().transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
    D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return Eigen::Matrix3d(svd.matrixV() * D * svd.matrixU().transpose());
}

std::optional<RotationConsensus> rotation_consensus(std::span<const Correspondence> pairs,
                                                    const CameraIntrinsics &K_t, double angle_tol) {
    std::optional<RotationConsensus> best;
    std::vector<size_t> members;
    for (size_t i = 0; i < pairs.size(); ++i) {
        for (size_t j = i + 1; j < pairs.size(); ++j) {
            const std::optional<Eigen::Matrix3d> R = rotation_from_two_directions(pairs[i], pairs[j]);
            if (!R) {
                continue;
            }
            members.clear();
            double sum = 0.0;
            for (size_t k = 0; k < pairs.size(); ++k) {
                const double r = rotation_residual(pairs[k], *R, K_t);
                if (r < angle_tol) {
                    members.push_back(k);
                    sum += r;
                }
            }
            const bool larger = !best || members.size() > best->members.size();
            const bool tie_closer = best && members.size() == best->members.size() && sum < best->summed_residual;
            if (larger || tie_closer) {
                best = RotationConsensus{members, *R, sum};
            }
        }
    }
    return best;
}

CandidateLine candidate_from_full3d(const Correspondence &c, const Eigen::Matrix3d &R) {
    if (c.kind != CaseKind::Full3D || !c.target_3d) {
        throw Error(ErrorCode::WrongKind, "candidate_from_full3d requires a Full3D correspondence");
    }
    const Eigen::Vector3d u = R * c.source_line.d;
    // The moment flips with the direction; align the target line with R d_s first.
    const PluckerLine target = c.target_3d->line.d.dot(u) < 0.0 ? c.target_3d->line.flipped() : c.target_3d->line;
    CandidateLine out;
    out.p0 = (R * c.source_line.m - target.m).cross(u);
    out.u = u.normalized();
    out.correspondence_id = c.id;
    out.kind = CaseKind::Full3D;
    return out;
}

CandidateLine candidate_from_pnl(const Correspondence &c, const Eigen::Matrix3d &R, const CameraIntrinsics &K_t) {
    if (c.kind != CaseKind::PnL) {
        throw Error(ErrorCode::WrongKind, "candidate_from_pnl requires a PnL correspondence");
    }
    const Eigen::Matrix3d Kl = line_projection_matrix(K_t);
    const Eigen::Vector3d u = R * c.source_line.d;
    const Eigen::Vector3d Rm = R * c.source_line.m;

    const Eigen::Vector2d &e1 = c.target_line_2d.endpoints[0];
    const Eigen::Vector2d &e2 = c.target_line_2d.endpoints[1];
    if ((e1 - e2).norm() < 1e-9) {
        throw Error(ErrorCode::ParallelPlanes, "coincident target endpoints");
    }

    // x' Kl (R m_s + t x u) = 0  <=>  ([u]x Kl' x)' t = -x' Kl R m_s
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    double offset = 0.0;
    Eigen::Vector3d first = Eigen::Vector3d::Zero();
    for (int j = 0; j < 2; ++j) {
        const Eigen::Vector3d x = c.target_line_2d.endpoints[j].homogeneous();
        Eigen::Vector3d n = u.cross(Kl.transpose() * x);
        double rhs = -x.dot(Kl * Rm);
        const double norm = n.norm();
        if (!(norm > 1e-12 * (Kl.transpose() * x).norm())) {
            throw Error(ErrorCode::ParallelPlanes, "endpoint plane is undefined");
        }
        n /= norm;
        rhs /= norm;
        if (j == 0) {
            first = n;
        } else if (n.dot(first) < 0.0) {
            n = -n;
            rhs = -rhs;
        }
        normal += n;
        offset += rhs;
    }
    const double len = normal.norm();
    CandidateLine out;
    out.shape = CandidateShape::Plane;
    out.u = normal / len;
    out.p0 = (offset / len) * out.u;
    out.correspondence_id = c.id;
    out.kind = CaseKind::PnL;
    return out;
}

CandidateLine candidate_line(const Correspondence &c, const Eigen::Matrix3d &R, const CameraIntrinsics &K_t) {
    return c.kind == CaseKind::Full3D ? candidate_from_full3d(c, R) : candidate_from_pnl(c, R, K_t);
}

Eigen::Vector3d equidistant_point(const CandidateLine &l1, const CandidateLine &l2) {
    const Eigen::Vector3d &u1 = l1.u;
    const Eigen::Vector3d &u2 = l2.u;
    if (u1.cross(u2).norm() < 1e-9) {
        throw Error(ErrorCode::ParallelLines, "candidate lines are parallel");
    }
    const Eigen::Vector3d w0 = l1.p0 - l2.p0;
    const double b = u1.dot(u2);
    const double d = u1.dot(w0);
    const double e = u2.dot(w0);
    const double denom = u1.squaredNorm() * u2.squaredNorm() - b * b;
    const double sc = (b * e - u2.squaredNorm() * d) / denom;
    const double tc = (u1.squaredNorm() * e - b * d) / denom;
    return 0.5 * ((l1.p0 + sc * u1) + (l2.p0 + tc * u2));
}

std::optional<Eigen::Vector3d> hypothesis_point(const CandidateLine &a, const CandidateLine &b) {
    const bool a_line = a.shape == CandidateShape::Line;
    const bool b_line = b.shape == CandidateShape::Line;
    if (a_line && b_line) {
        if (a.u.cross(b.u).norm() < 1e-9) {
            return std::nullopt;
        }
        return equidistant_point(a, b);
    }
    if (!a_line && !b_line) {
        return std::nullopt;
    }
    const CandidateLine &line = a_line ? a : b;
    const CandidateLine &plane = a_line ? b : a;
    const double denom = line.u.dot(plane.u);
    if (std::abs(denom) < 1e-9) {
        return std::nullopt;
    }
    const double k = (plane.p0 - line.p0).dot(plane.u) / denom;
    return Eigen::Vector3d(line.p0 + k * line.u);
}

int default_vote_threshold(size_t num_lines) {
    return std::max(4, static_cast<int>(std::ceil(0.6 * static_cast<double>(num_lines))));
}

VotingResult convergence_voting(std::span<const CandidateLine> lines, double epsilon_d, int vote_threshold) {
    VotingResult best;
    best.epsilon_d = epsilon_d;
    best.summed_distance = std::numeric_limits<double>::infinity();

    const int n = static_cast<int>(lines.size());
    int usable_pairs = 0;
    std::vector<double> distances;
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const std::optional<Eigen::Vector3d> hyp = hypothesis_point(lines[i], lines[j]);
            if (!hyp) {
                continue;
            }
            ++usable_pairs;
            const Eigen::Vector3d &point = *hyp;
            members.clear();
            distances.clear();
            for (int k = 0; k < n; ++k) {
                const double dist = lines[k].distance_to(point);
                if (dist < epsilon_d) {
                    members.push_back(k);
                    distances.push_back(dist);
                }
            }
            // Sorted summation keeps the tie-break independent of input order.
            std::sort(distances.begin(), distances.end());
            double sum = 0.0;
            for (double v : distances) {
                sum += v;
            }
            const bool larger = members.size() > best.inlier_set.size();
            const bool tie_closer = members.size() == best.inlier_set.size() && sum < best.summed_distance;
            if (!best.convergence_point || larger || tie_closer) {
                best.inlier_set = members;
                best.summed_distance = sum;
                best.convergence_point = point;
            }
        }
    }
    if (usable_pairs < 2) {
        throw Error(ErrorCode::InsufficientLines, "convergence voting needs at least two usable candidate pairs");
    }
    best.converged = static_cast<int>(best.inlier_set.size()) >= vote_threshold;
    return best;
}

} // namespace pelical
