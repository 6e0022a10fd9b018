#include "pelical/solver.h"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace pelical {

TranslationElimination eliminate_translation(const QuadraticSystem &sys) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd &sv = svd.singularValues();
    if (sv.size() < 3 || !(sv(0) > 0.0) || sv(2) <= 1e-10 * sv(0)) {
        throw Error(ErrorCode::DegenerateTranslation, "translation is unobservable: rank(B) < 3");
    }
    const Eigen::Matrix3d sigma_inv = sv.head<3>().cwiseInverse().asDiagonal();
    const Eigen::MatrixXd B_pinv = svd.matrixV() * sigma_inv * svd.matrixU().transpose();

    TranslationElimination out;
    out.tau_map = -B_pinv * sys.A;
    out.G = sys.A + sys.B * out.tau_map;
    return out;
}

namespace {

using Mat10 = Eigen::Matrix<double, 10, 10>;

// Upper-triangular factor with ||F r|| = ||G r|| for every r.
Mat10 compress(const Eigen::Matrix<double, Eigen::Dynamic, 10> &G) {
    if (G.rows() < 10) {
        Mat10 F = Mat10::Zero();
        F.topRows(G.rows()) = G;
        return F;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    return qr.matrixQR().topRows<10>().triangularView<Eigen::Upper>();
}

double objective(const Mat10 &F, const Eigen::Vector3d &s) { return (F * cgr_monomials(s)).squaredNorm(); }

// Damped Gauss-Newton descent on ||F r(s)||^2 from one start point.
bool local_root(const Mat10 &F, Eigen::Vector3d &s) {
    double lambda = 1e-3;
    double f = objective(F, s);
    for (int iter = 0; iter < 200; ++iter) {
        const Eigen::Matrix<double, 10, 1> e = F * cgr_monomials(s);
        const Eigen::Matrix<double, 10, 3> J = F * cgr_monomials_jacobian(s);
        const Eigen::Matrix3d H = J.transpose() * J;
        const Eigen::Vector3d g = J.transpose() * e;
        if (g.norm() <= 1e-15 * (1.0 + f)) {
            break;
        }
        Eigen::Matrix3d Hd = H;
        Hd.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
        const Eigen::Vector3d step = Hd.ldlt().solve(-g);
        const Eigen::Vector3d s_new = s + step;
        const double f_new = objective(F, s_new);
        if (std::isfinite(f_new) && f_new < f) {
            s = s_new;
            const double decrease = f - f_new;
            f = f_new;
            lambda = std::max(lambda * 0.1, 1e-12);
            if (step.norm() <= 1e-14 * (1.0 + s.norm()) || decrease <= 1e-16 * f || f <= 1e-30) {
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) {
                break;
            }
        }
        if (s.norm() > 1e6) {
            return false;
        }
    }
    return s.allFinite() && s.norm() < 1e6;
}

} // namespace

PoseSolution solve_quadratic_system(const QuadraticSystem &sys, const SolverConfig &cfg) {
    const TranslationElimination elim = eliminate_translation(sys);
    const Mat10 F = compress(elim.G);

    std::vector<Eigen::Vector3d> starts;
    if (elim.G.rows() >= 9) {
        // Treat the nine non-constant monomials as independent unknowns.
        const Eigen::MatrixXd lhs = elim.G.leftCols<9>();
        const Eigen::VectorXd rhs = -elim.G.col(9);
        const Eigen::VectorXd lin = lhs.completeOrthogonalDecomposition().solve(rhs);
        if (lin.allFinite()) {
            starts.push_back(lin.segment<3>(6));
        }
    }
    const int n = std::max(1, cfg.multistart_points_per_axis);
    const double w = cfg.multistart_halfwidth;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                const auto coord = [&](int idx) { return n == 1 ? 0.0 : -w + 2.0 * w * idx / (n - 1); };
                starts.emplace_back(coord(i), coord(j), coord(k));
            }
        }
    }

    std::vector<CgrRoot> roots;
    for (Eigen::Vector3d s : starts) {
        if (!local_root(F, s)) {
            continue;
        }
        const Monomials r = cgr_monomials(s);
        CgrRoot root{s, elim.tau_map * r, (elim.G * r).norm()};
        if (!std::isfinite(root.residual)) {
            continue;
        }
        auto same = std::find_if(roots.begin(), roots.end(),
                                 [&](const CgrRoot &o) { return (o.s - s).norm() <= 1e-6 * (1.0 + s.norm()); });
        if (same == roots.end()) {
            roots.push_back(root);
        } else if (root.residual < same->residual) {
            *same = root;
        }
    }
    if (roots.empty()) {
        throw Error(ErrorCode::NoRealSolution, "no real root of the quadratic system was found");
    }

    std::sort(roots.begin(), roots.end(), [](const CgrRoot &a, const CgrRoot &b) {
        if (std::abs(a.residual - b.residual) > 1e-12) {
            return a.residual < b.residual;
        }
        return a.s.norm() < b.s.norm();
    });

    const CgrRoot &best = roots.front();
    PoseSolution sol;
    sol.s = best.s;
    sol.extrinsics.R = cgr_to_rotation(best.s);
    sol.extrinsics.t = best.tau / (1.0 + best.s.squaredNorm());
    sol.algebraic_residual = best.residual;
    sol.all_candidates = std::move(roots);
    return sol;
}

std::vector<double> residual_weights(std::span<const Correspondence> cs, const CameraIntrinsics &K_t) {
    std::vector<double> w;
    w.reserve(cs.size());
    for (const Correspondence &c : cs) {
        if (c.kind == CaseKind::Full3D && c.target_3d) {
            const double z = 0.5 * (c.target_3d->endpoints[0].z() + c.target_3d->endpoints[1].z());
            const double scale = K_t.fx / std::max(std::abs(z), 1e-3);
            w.push_back(scale * scale);
        } else {
            w.push_back(1.0);
        }
    }
    return w;
}

namespace {

// Stacked weighted residuals; sqrt(weight) multiplies each block.
Eigen::VectorXd stacked_residuals(std::span<const Correspondence> cs, const std::vector<double> &weights,
                                  const CameraIntrinsics &K_t, const Extrinsics &T, Eigen::MatrixXd *J) {
    Eigen::Index rows = 0;
    for (const Correspondence &c : cs) {
        rows += c.kind == CaseKind::Full3D ? 6 : 2;
    }
    Eigen::VectorXd e(rows);
    if (J) {
        J->resize(rows, 6);
    }
    Eigen::Index row = 0;
    for (size_t i = 0; i < cs.size(); ++i) {
        const Correspondence &c = cs[i];
        const double sw = std::sqrt(weights[i]);
        if (c.kind == CaseKind::Full3D) {
            const auto r = point_to_line_residual(c, T);
            e.segment<3>(row) = sw * r[0];
            e.segment<3>(row + 3) = sw * r[1];
            if (J) {
                J->middleRows<6>(row) = sw * point_to_line_jacobian(c, T);
            }
            row += 6;
        } else {
            e.segment<2>(row) = sw * line_reprojection_residual(c, T, K_t);
            if (J) {
                J->middleRows<2>(row) = sw * line_reprojection_jacobian(c, T, K_t);
            }
            row += 2;
        }
    }
    return e;
}

Extrinsics apply_update(const Extrinsics &T, const Eigen::Matrix<double, 6, 1> &delta) {
    return {orthonormalize(so3_exp(delta.head<3>()) * T.R), T.t + delta.tail<3>()};
}

} // namespace

double refinement_cost(std::span<const Correspondence> cs, const CameraIntrinsics &K_t, const Extrinsics &T) {
    return stacked_residuals(cs, residual_weights(cs, K_t), K_t, T, nullptr).squaredNorm();
}

PoseSolution refine(const PoseSolution &initial, std::span<const Correspondence> cs, const CameraIntrinsics &K_t,
                    const SolverConfig &cfg) {
    if (cs.empty()) {
        throw Error(ErrorCode::EmptyInput, "refinement needs at least one correspondence");
    }
    const std::vector<double> weights = residual_weights(cs, K_t);
    Extrinsics T{orthonormalize(initial.extrinsics.R), initial.extrinsics.t};

    PoseSolution out = initial;
    Eigen::MatrixXd J;
    Eigen::VectorXd e = stacked_residuals(cs, weights, K_t, T, &J);
    double cost = e.squaredNorm();
    out.initial_cost = cost;
    out.cost_history = {cost};
    out.converged = false;

    double lambda = cfg.lm_initial_damping;
    int iter = 0;
    for (; iter < cfg.max_lm_iterations; ++iter) {
        if (cost <= 1e-28) {
            out.converged = true;
            break;
        }
        const Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
        const Eigen::Matrix<double, 6, 1> g = J.transpose() * e;
        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix<double, 6, 6> Hd = H;
            Hd.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
            const Eigen::Matrix<double, 6, 1> delta = Hd.ldlt().solve(-g);
            const Extrinsics T_new = apply_update(T, delta);
            Eigen::MatrixXd J_new;
            Eigen::VectorXd e_new;
            double cost_new = std::numeric_limits<double>::infinity();
            try {
                e_new = stacked_residuals(cs, weights, K_t, T_new, &J_new);
                cost_new = e_new.squaredNorm();
            } catch (const Error &) {
                cost_new = std::numeric_limits<double>::infinity();
            }
            if (std::isfinite(cost_new) && cost_new < cost) {
                const double rel = (cost - cost_new) / cost;
                T = T_new;
                e = std::move(e_new);
                J = std::move(J_new);
                cost = cost_new;
                out.cost_history.push_back(cost);
                lambda = std::max(lambda * 0.1, 1e-15);
                accepted = true;
                if (rel < cfg.cost_tolerance) {
                    out.converged = true;
                }
            } else {
                lambda *= 10.0;
                if (lambda > 1e16) {
                    // No descent direction left at working precision.
                    out.converged = true;
                    break;
                }
            }
        }
        if (out.converged) {
            ++iter;
            break;
        }
    }

    out.extrinsics = T;
    out.refined_cost = cost;
    out.iterations = iter;
    try {
        out.s = rotation_to_cgr(T.R);
    } catch (const Error &) {
        // Keep the previous parameters near the CGR singularity.
    }
    return out;
}

double jacobian_check(std::span<const Correspondence> cs, const CameraIntrinsics &K_t, const Extrinsics &T,
                      double step) {
    double worst = 0.0;
    for (const Correspondence &c : cs) {
        const bool full = c.kind == CaseKind::Full3D;
        const Eigen::Index n = full ? 6 : 2;
        Eigen::MatrixXd analytic(n, 6);
        if (full) {
            analytic = point_to_line_jacobian(c, T);
        } else {
            analytic = line_reprojection_jacobian(c, T, K_t);
        }
        Eigen::MatrixXd numeric(n, 6);
        for (int k = 0; k < 6; ++k) {
            Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
            delta(k) = step;
            const Extrinsics Tp{so3_exp(delta.head<3>()) * T.R, T.t + delta.tail<3>()};
            const Extrinsics Tm{so3_exp(-delta.head<3>()) * T.R, T.t - delta.tail<3>()};
            numeric.col(k) = (residual_block(c, Tp, K_t).values - residual_block(c, Tm, K_t).values) / (2.0 * step);
        }
        const double scale = std::max(numeric.norm(), 1e-12);
        worst = std::max(worst, (analytic - numeric).norm() / scale);
    }
    return worst;
}

} // namespace pelical
