#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tpca/errors.hpp"

namespace tpca {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

/// A point on the D-torus: D angles in radians, each in [0, 2*pi).
using TorusPoint = Eigen::VectorXd;

/// A data set on the torus, one point per row.
using TorusData = Eigen::MatrixXd;

/// Map x to its representative in [0, 2*pi).
inline double wrap_angle(double x) {
    if (!std::isfinite(x)) throw InvalidInput("wrap_angle: non-finite input");
    double r = std::fmod(x, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

/// Wrap every coordinate of a torus point into [0, 2*pi).
inline TorusPoint wrap_point(const TorusPoint& p) {
    TorusPoint out(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = wrap_angle(p[i]);
    return out;
}

/// Signed circular difference a - b reduced to (-pi, pi].
inline double signed_circle_diff(double a, double b) {
    const double w = wrap_angle(a - b);
    return w > kPi ? w - kTwoPi : w;
}

/// Arc-length distance on the circle, in [0, pi].
inline double circle_distance(double a, double b) { return std::abs(signed_circle_diff(a, b)); }

/// Torus metric: the l2 norm of the per-coordinate arc distances.
inline double torus_distance(const TorusPoint& p, const TorusPoint& q) {
    if (p.size() != q.size()) throw InvalidInput("torus_distance: dimension mismatch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double d = signed_circle_diff(p[i], q[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

/// Sum of squared signed deviations of a circular sample about mu.
inline double angular_spread(const Eigen::Ref<const Eigen::VectorXd>& values, double mu) {
    if (!std::isfinite(mu)) throw InvalidInput("angular_spread: non-finite center");
    double s = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double d = signed_circle_diff(values[i], mu);
        s += d * d;
    }
    return s;
}

/// Intrinsic (Frechet) mean of angles on the circle.
///
/// The Frechet function F(mu) = sum_i d_circ(x_i, mu)^2 is piecewise quadratic
/// in mu; between antipodes of data points its vertex is the arithmetic mean of
/// the locally unwrapped representatives, so every local minimizer lies on the
/// grid {mean(x) + 2*pi*j/n}. Evaluating F on that grid is therefore exact.
/// Ties within 1e-10 are broken toward the smallest angle and flagged.
inline double circular_intrinsic_mean(const Eigen::Ref<const Eigen::VectorXd>& values,
                                      bool* tie_flag = nullptr) {
    const Eigen::Index n = values.size();
    if (n == 0) throw InvalidInput("circular_intrinsic_mean: empty sample");
    if (tie_flag) *tie_flag = false;

    double base = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) base += wrap_angle(values[i]);
    base /= static_cast<double>(n);

    double best_mu = 0.0;
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> near_ties;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double mu = wrap_angle(base + kTwoPi * static_cast<double>(j) / static_cast<double>(n));
        const double f = angular_spread(values, mu);
        if (f < best_f - 1e-10) {
            best_f = f;
            best_mu = mu;
            near_ties.assign(1, mu);
        } else if (f <= best_f + 1e-10) {
            near_ties.push_back(mu);
            if (f < best_f) best_f = f;
            // keep the smallest angle among tied minimizers
            best_mu = *std::min_element(near_ties.begin(), near_ties.end());
        }
    }
    if (tie_flag && near_ties.size() > 1) *tie_flag = true;
    return best_mu;
}

/// Antipode of the midpoint of the largest gap between neighboring sample
/// angles. Equal gaps are resolved toward the smallest gap-start angle.
inline double gap_antipode_center(const Eigen::Ref<const Eigen::VectorXd>& values,
                                  bool* tie_flag = nullptr) {
    const Eigen::Index n = values.size();
    if (n < 2) throw InvalidInput("gap_antipode_center: need at least 2 values");
    if (tie_flag) *tie_flag = false;

    std::vector<double> v(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<size_t>(i)] = wrap_angle(values[i]);
    std::sort(v.begin(), v.end());

    double best_gap = -1.0, best_start = 0.0;
    int ties = 0;
    for (size_t i = 0; i < v.size(); ++i) {
        const double next = (i + 1 < v.size()) ? v[i + 1] : v[0] + kTwoPi;
        const double gap = next - v[i];
        if (gap > best_gap + 1e-12) {
            best_gap = gap;
            best_start = v[i];
            ties = 0;
        } else if (gap > best_gap - 1e-12) {
            ++ties;  // sorted scan: the first occurrence already has the smallest start
        }
    }
    if (tie_flag && ties > 0) *tie_flag = true;
    return wrap_angle(best_start + best_gap / 2.0 + kPi);
}

struct FrechetVariance {
    double total = 0.0;       ///< minimal sum of squared torus distances
    TorusPoint minimizer;     ///< coordinatewise circular intrinsic mean
    bool degenerate = false;  ///< some coordinate had tied minimizers
};

/// Total variance of a torus sample: the torus metric separates over
/// coordinates, so the Frechet functional is minimized coordinatewise.
inline FrechetVariance torus_frechet_variance(const TorusData& points) {
    if (points.rows() == 0) throw InvalidInput("torus_frechet_variance: empty set");
    FrechetVariance out;
    out.minimizer.resize(points.cols());
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        bool tie = false;
        const double mu = circular_intrinsic_mean(points.col(k), &tie);
        out.minimizer[k] = mu;
        out.total += angular_spread(points.col(k), mu);
        out.degenerate = out.degenerate || tie;
    }
    return out;
}

}  // namespace tpca
