#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tpca/deformation.hpp"
#include "tpca/errors.hpp"
#include "tpca/rng.hpp"

namespace tpca {

/// One nesting level: a codimension-1 subsphere of S^d given by a unit axis
/// and an angular radius r in (0, pi/2]; r = pi/2 is a great subsphere.
struct Subsphere {
    int ambient_dim = 0;     ///< d, the sphere the axis lives on
    Eigen::VectorXd axis;    ///< unit vector in R^{d+1}
    double radius = 0.0;     ///< angular, in (0, pi/2]
};

struct SubsphereFit {
    Subsphere sub;
    double objective = 0.0;      ///< sum of squared angular residuals
    bool converged = false;
    bool forced_great = false;   ///< too few points for a small-sphere fit
    bool degenerate_radius = false;
    int restarts = 0;
};

namespace detail {

/// Householder reflection mapping `axis` onto the last basis vector. Its own
/// transpose, so the same matrix lifts back.
inline Eigen::MatrixXd axis_to_pole_frame(const Eigen::VectorXd& axis) {
    const Eigen::Index m = axis.size();
    Eigen::VectorXd w = axis;
    w[m - 1] -= 1.0;
    const double n2 = w.squaredNorm();
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
    if (n2 > 1e-30) h -= (2.0 / n2) * (w * w.transpose());
    return h;
}

inline Eigen::VectorXd angles_to_axis(const Eigen::MatrixXd& pts, const Eigen::VectorXd& axis) {
    return (pts * axis).array().min(1.0).max(-1.0).acos().matrix();
}

/// Levenberg-Marquardt over the axis on the sphere, with the radius either
/// eliminated (mean of angles, small-sphere case) or pinned at pi/2.
inline bool lm_axis_fit(const Eigen::MatrixXd& pts, Eigen::VectorXd& axis, bool great,
                        double grad_tol, int max_iter) {
    const Eigen::Index n = pts.rows();
    const Eigen::Index m = pts.cols();
    double lambda = 1e-3;

    auto objective = [&](const Eigen::VectorXd& a) {
        Eigen::VectorXd th = angles_to_axis(pts, a);
        const double r = great ? kPi / 2.0 : th.mean();
        return (th.array() - r).matrix().squaredNorm();
    };

    double f_cur = objective(axis);
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd frame = axis_to_pole_frame(axis);  // cols 0..m-2 span the tangent
        Eigen::VectorXd th = angles_to_axis(pts, axis);
        const double r = great ? kPi / 2.0 : th.mean();
        Eigen::VectorXd e = th.array() - r;

        // d theta_i / d t_k = -<x_i, u_k> / sin theta_i
        const Eigen::VectorXd inv_sin = th.array().sin().max(1e-12).inverse().matrix();
        Eigen::MatrixXd jac(n, m - 1);
        for (Eigen::Index k = 0; k + 1 < m; ++k) {
            jac.col(k) = -(pts * frame.col(k)).cwiseProduct(inv_sin);
        }
        if (!great) jac.rowwise() -= jac.colwise().mean();  // radius elimination

        const Eigen::VectorXd grad = jac.transpose() * e;
        if (grad.lpNorm<Eigen::Infinity>() < grad_tol) { converged = true; break; }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd delta = damped.ldlt().solve(-grad);
            Eigen::VectorXd cand = axis;
            for (Eigen::Index k = 0; k + 1 < m; ++k) cand += delta[k] * frame.col(k);
            const double nc = cand.norm();
            if (nc < 1e-14) { lambda *= 4.0; continue; }
            cand /= nc;
            const double f_new = objective(cand);
            if (f_new < f_cur) {
                axis = cand;
                f_cur = f_new;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!stepped) {
            // no damped step can improve the objective: stalled at the
            // resolution of the objective evaluation, accept
            converged = true;
            break;
        }
    }
    return converged;
}

inline std::vector<Eigen::VectorXd> fit_starts(const Eigen::MatrixXd& pts, bool great,
                                               std::uint64_t seed, int random_starts) {
    const Eigen::Index m = pts.cols();
    std::vector<Eigen::VectorXd> starts;
    if (great) {
        // smallest direction of the second-moment matrix: the classic pole guess
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pts.transpose() * pts);
        starts.push_back(eig.eigenvectors().col(0));
    } else {
        Eigen::RowVectorXd mean = pts.colwise().mean();
        Eigen::MatrixXd centered = pts.rowwise() - mean;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered.transpose() * centered);
        starts.push_back(eig.eigenvectors().col(0));
        if (mean.norm() > 1e-9) starts.push_back(mean.transpose().normalized());
    }
    Rng rng(seed);
    for (int s = 0; s < random_starts; ++s) {
        Eigen::VectorXd v(m);
        for (Eigen::Index i = 0; i < m; ++i) v[i] = rng.normal();
        starts.push_back(v.normalized());
    }
    return starts;
}

}  // namespace detail

/// Least-squares small subsphere through points on S^d (rows of `pts`,
/// embedded in R^{d+1}): minimizes sum (acos<axis, x_i> - r)^2 over the unit
/// axis with r the mean angle, multi-start from the smallest principal
/// direction plus seeded random restarts. The representative with r <= pi/2
/// is returned; fitting never consults the gluing.
inline SubsphereFit fit_subsphere(const Eigen::MatrixXd& pts, std::uint64_t seed = 0x5eed5u,
                                  int random_starts = 5, double grad_tol = 1e-10,
                                  int max_iter = 200);

/// Great-subsphere fit: radius pinned at pi/2.
inline SubsphereFit fit_great_subsphere(const Eigen::MatrixXd& pts, std::uint64_t seed = 0x5eed5u,
                                        int random_starts = 5, double grad_tol = 1e-10,
                                        int max_iter = 200) {
    const Eigen::Index n = pts.rows();
    const int d = static_cast<int>(pts.cols()) - 1;
    if (n < 2) throw InvalidInput("fit_great_subsphere: need at least 2 points");

    SubsphereFit best;
    bool any = false;
    int used = 0;
    for (auto& start : detail::fit_starts(pts, true, seed, random_starts)) {
        Eigen::VectorXd axis = start;
        const bool conv = detail::lm_axis_fit(pts, axis, true, grad_tol, max_iter);
        ++used;
        const double obj =
            (detail::angles_to_axis(pts, axis).array() - kPi / 2.0).matrix().squaredNorm();
        if (!any || obj < best.objective ||
            (obj == best.objective && conv && !best.converged)) {
            any = true;
            best.sub = Subsphere{d, axis, kPi / 2.0};
            best.objective = obj;
            best.converged = conv;
        }
    }
    best.restarts = used;
    if (!best.converged)
        throw FitFailure("fit_great_subsphere: no restart converged (best objective " +
                         std::to_string(best.objective) + ")");
    // canonical sign: largest-magnitude component positive
    Eigen::Index imax = 0;
    best.sub.axis.cwiseAbs().maxCoeff(&imax);
    if (best.sub.axis[imax] < 0.0) best.sub.axis = -best.sub.axis;
    return best;
}

inline SubsphereFit fit_subsphere(const Eigen::MatrixXd& pts, std::uint64_t seed,
                                  int random_starts, double grad_tol, int max_iter) {
    const Eigen::Index n = pts.rows();
    const int d = static_cast<int>(pts.cols()) - 1;
    if (n < 2) throw InvalidInput("fit_subsphere: need at least 2 points");
    if (n < d + 2) {
        SubsphereFit fit = fit_great_subsphere(pts, seed, random_starts, grad_tol, max_iter);
        fit.forced_great = true;
        return fit;
    }

    SubsphereFit best;
    bool any = false;
    int used = 0;
    for (auto& start : detail::fit_starts(pts, false, seed, random_starts)) {
        Eigen::VectorXd axis = start;
        const bool conv = detail::lm_axis_fit(pts, axis, false, grad_tol, max_iter);
        ++used;
        Eigen::VectorXd th = detail::angles_to_axis(pts, axis);
        const double obj = (th.array() - th.mean()).matrix().squaredNorm();
        if (!any || obj < best.objective || (obj == best.objective && conv && !best.converged)) {
            any = true;
            double r = th.mean();
            Eigen::VectorXd a = axis;
            if (r > kPi / 2.0) {  // antipodal representative, objective unchanged
                a = -a;
                r = kPi - r;
            }
            if (r < 1e-9) {
                r = 1e-9;
                best.degenerate_radius = true;
            }
            best.sub = Subsphere{d, a, r};
            best.objective = obj;
            best.converged = conv;
        }
    }
    best.restarts = used;
    if (!best.converged)
        throw FitFailure("fit_subsphere: no restart converged (best objective " +
                         std::to_string(best.objective) + ")");
    return best;
}

/// Angular distance from a point to the subsphere axis; at the glued top
/// level the shorter through-boundary passage counts.
inline double axis_distance(const SpherePoint& x, const Subsphere& sub,
                            const DeformationSpec* glue_spec) {
    const double plain = std::acos(std::clamp(x.dot(sub.axis), -1.0, 1.0));
    if (!glue_spec || !glue_spec->has_gluing()) return plain;
    return std::min(plain, glued_distance(*glue_spec, x, sub.axis));
}

/// Signed residuals xi_i = r - rho_i: positive inside the cap that contains
/// the axis, negative outside.
inline Eigen::VectorXd signed_residuals(const Eigen::MatrixXd& pts, const Subsphere& sub,
                                        const DeformationSpec* glue_spec = nullptr) {
    Eigen::VectorXd out(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        out[i] = sub.radius - axis_distance(pts.row(i).transpose(), sub, glue_spec);
    return out;
}

struct Projection {
    Eigen::VectorXd foot;     ///< foot point on the subsphere, ambient coordinates
    Eigen::VectorXd reduced;  ///< the same point on the unit S^{d-1}
    bool at_axis = false;     ///< input coincided with +-axis and was nudged
    bool through_glue = false;
};

namespace detail {

inline Eigen::VectorXd spherical_foot(const SpherePoint& x, const Subsphere& sub) {
    const double t = x.dot(sub.axis);
    Eigen::VectorXd w = x - t * sub.axis;
    const double nw = w.norm();
    return std::cos(sub.radius) * sub.axis + std::sin(sub.radius) * (w / nw);
}

}  // namespace detail

/// Project one point onto the subsphere along the minimizing path, then
/// re-coordinatize onto the unit sphere one dimension down (rotate the axis
/// to the pole, drop the last coordinate, rescale by 1/sin r).
///
/// When `glue_spec` carries identifications (top level only), mirror images
/// of the point through each glued wall supply alternative foot candidates;
/// the candidate closest in glued distance wins.
inline Projection project_to_subsphere(const SpherePoint& x, const Subsphere& sub,
                                       const Eigen::MatrixXd& frame,
                                       const DeformationSpec* glue_spec = nullptr) {
    Projection out;
    SpherePoint p = x;
    const double t0 = p.dot(sub.axis);
    if (1.0 - std::abs(t0) < 1e-12) {
        // measure-zero case: nudge deterministically and record it
        p[0] += 1e-9;
        p.normalize();
        out.at_axis = true;
    }

    Eigen::VectorXd foot = detail::spherical_foot(p, sub);
    if (glue_spec && glue_spec->has_gluing()) {
        double best = glued_distance(*glue_spec, p, foot);
        for (int slot : glue_spec->glued_slots) {
            SpherePoint mirrored = p;
            mirrored[slot] = -mirrored[slot];
            if (1.0 - std::abs(mirrored.dot(sub.axis)) < 1e-12) continue;
            const Eigen::VectorXd cand = detail::spherical_foot(mirrored, sub);
            const double dist = glued_distance(*glue_spec, p, cand);
            if (dist < best - 1e-15) {
                best = dist;
                foot = cand;
                out.through_glue = true;
            }
        }
    }

    out.foot = foot;
    const Eigen::VectorXd rotated = frame * foot;  // axis at the pole
    Eigen::VectorXd reduced = rotated.head(rotated.size() - 1) / std::sin(sub.radius);
    const double nr = reduced.norm();
    if (nr > 0.0) reduced /= nr;  // renormalize against rounding
    out.reduced = reduced;
    return out;
}

/// Lift a point of the reduced unit S^{d-1} back onto the subsphere in
/// ambient S^d coordinates.
inline Eigen::VectorXd lift_from_subsphere(const Eigen::VectorXd& reduced, const Subsphere& sub,
                                           const Eigen::MatrixXd& frame) {
    Eigen::VectorXd z(reduced.size() + 1);
    z.head(reduced.size()) = std::sin(sub.radius) * reduced;
    z[reduced.size()] = std::cos(sub.radius);
    return frame * z;  // Householder frame is symmetric, forward == backward
}

}  // namespace tpca
