#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tpca/angles.hpp"
#include "tpca/errors.hpp"

namespace tpca {

/// Polar coordinates on the sphere: phi_k in (0, pi] for the outer slots,
/// phi_{D-1} in [0, 2*pi) for the innermost slot.
using PolarPoint = Eigen::VectorXd;

/// Unit vector in R^{D+1}.
using SpherePoint = Eigen::VectorXd;

enum class Centering { Mean, GapAntipode };        // MC / GC
enum class Ordering { SpreadInside, SpreadOutside };  // SI / SO

inline const char* centering_tag(Centering c) { return c == Centering::Mean ? "MC" : "GC"; }
inline const char* ordering_tag(Ordering o) {
    return o == Ordering::SpreadInside ? "SI" : "SO";
}

/// The data-driven chart sending torus angles to spherical polar angles.
///
/// Slot k (0-based, slot 0 outermost) receives torus coordinate
/// slot_to_coord[k], recentered at centers[k] and scaled by scalings[k]:
///     phi_k = pi/2 + scalings[k] * (psi - centers[k])
/// with the difference reduced to (-pi, pi]. The innermost slot is never
/// scaled. Halved slots carry the identification phi = 0 == phi = pi.
struct DeformationSpec {
    std::vector<int> slot_to_coord;  ///< permutation, slot -> original coordinate
    Eigen::VectorXd centers;         ///< per slot, in [0, 2*pi)
    Eigen::VectorXd scalings;        ///< per slot, 1/2 or 1; last entry always 1
    Centering centering = Centering::Mean;
    Ordering ordering = Ordering::SpreadInside;
    std::vector<int> glued_slots;    ///< slots k < D-1 with scaling 1/2
    bool degenerate_spreads = false; ///< all spreads equal, identity permutation used
    bool center_ties = false;       ///< a center computation hit tied minimizers

    int dim() const { return static_cast<int>(slot_to_coord.size()); }
    bool has_gluing() const { return !glued_slots.empty(); }

    std::string tag() const {
        return std::string(centering_tag(centering)) + "-" + ordering_tag(ordering);
    }
};

/// Largest cyclic gap of a circular sample (the arc without data).
inline double largest_circular_gap(const Eigen::Ref<const Eigen::VectorXd>& values) {
    const Eigen::Index n = values.size();
    if (n == 0) throw InvalidInput("largest_circular_gap: empty sample");
    if (n == 1) return kTwoPi;
    std::vector<double> v(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<size_t>(i)] = wrap_angle(values[i]);
    std::sort(v.begin(), v.end());
    double best = v[0] + kTwoPi - v.back();
    for (size_t i = 0; i + 1 < v.size(); ++i) best = std::max(best, v[i + 1] - v[i]);
    return best;
}

/// Per original coordinate: 1 when the data fit inside a half circle
/// (largest gap exceeds pi), else 1/2. The slot ordering later forces the
/// innermost slot to 1 regardless.
inline Eigen::VectorXd choose_scalings(const TorusData& data) {
    if (data.rows() == 0) throw InvalidInput("choose_scalings: empty data");
    Eigen::VectorXd alpha(data.cols());
    for (Eigen::Index k = 0; k < data.cols(); ++k)
        alpha[k] = largest_circular_gap(data.col(k)) > kPi ? 1.0 : 0.5;
    return alpha;
}

/// Build the chart from data: centers (MC or GC), spreads about the centers,
/// slot permutation by spread (SI ascending, SO descending), data-driven
/// scalings with the innermost slot unscaled.
inline DeformationSpec build_spec(const TorusData& data, Centering centering, Ordering ordering) {
    const Eigen::Index n = data.rows(), D = data.cols();
    if (n < 2) throw InvalidInput("build_spec: need at least 2 points");
    if (D < 2) throw InvalidInput("build_spec: need at least 2 coordinates");

    DeformationSpec spec;
    spec.centering = centering;
    spec.ordering = ordering;

    Eigen::VectorXd mu(D), sig2(D);
    for (Eigen::Index k = 0; k < D; ++k) {
        bool tie = false;
        mu[k] = centering == Centering::Mean ? circular_intrinsic_mean(data.col(k), &tie)
                                             : gap_antipode_center(data.col(k), &tie);
        spec.center_ties = spec.center_ties || tie;
        sig2[k] = angular_spread(data.col(k), mu[k]);
    }

    std::vector<int> order(static_cast<size_t>(D));
    std::iota(order.begin(), order.end(), 0);
    const double lo = sig2.minCoeff(), hi = sig2.maxCoeff();
    if (hi - lo < 1e-12) {
        spec.degenerate_spreads = true;  // identity permutation
    } else if (ordering == Ordering::SpreadInside) {
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return sig2[a] < sig2[b]; });
    } else {
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return sig2[a] > sig2[b]; });
    }

    const Eigen::VectorXd alpha = choose_scalings(data);
    spec.slot_to_coord = order;
    spec.centers.resize(D);
    spec.scalings.resize(D);
    for (Eigen::Index k = 0; k < D; ++k) {
        const int c = order[static_cast<size_t>(k)];
        spec.centers[k] = mu[c];
        spec.scalings[k] = (k == D - 1) ? 1.0 : alpha[c];
        if (k < D - 1 && spec.scalings[k] == 0.5) spec.glued_slots.push_back(static_cast<int>(k));
    }
    return spec;
}

/// Apply the chart to one torus point. Unscaled outer slots are only selected
/// when the data fit a half circle; a value that still lands outside (0, pi]
/// is clamped and reported through `clamped`.
inline PolarPoint deform(const DeformationSpec& spec, const TorusPoint& psi,
                         bool* clamped = nullptr) {
    const int D = spec.dim();
    if (psi.size() != D) throw InvalidInput("deform: dimension mismatch");
    if (clamped) *clamped = false;
    PolarPoint phi(D);
    for (int k = 0; k < D; ++k) {
        const double d = signed_circle_diff(psi[spec.slot_to_coord[static_cast<size_t>(k)]],
                                            spec.centers[k]);
        if (k == D - 1) {
            phi[k] = wrap_angle(kPi / 2.0 + d);
        } else {
            double v = kPi / 2.0 + spec.scalings[k] * d;
            if (v < 0.0 || v > kPi) {
                v = std::clamp(v, 0.0, kPi);
                if (clamped) *clamped = true;
            }
            phi[k] = v;
        }
    }
    return phi;
}

/// Inverse chart. Halved slots are undefined on the glue boundary; polar
/// angles within 1e-12 of it raise AtSingularity.
inline TorusPoint inverse_deform(const DeformationSpec& spec, const PolarPoint& phi) {
    const int D = spec.dim();
    if (phi.size() != D) throw InvalidInput("inverse_deform: dimension mismatch");
    TorusPoint psi(D);
    for (int k = 0; k < D; ++k) {
        const int coord = spec.slot_to_coord[static_cast<size_t>(k)];
        if (k == D - 1) {
            psi[coord] = wrap_angle(spec.centers[k] + (phi[k] - kPi / 2.0));
        } else {
            if (spec.scalings[k] == 0.5 && (phi[k] < 1e-12 || phi[k] > kPi - 1e-12))
                throw AtSingularity("inverse_deform: polar angle on the glue boundary (slot " +
                                    std::to_string(k) + ")");
            psi[coord] = wrap_angle(spec.centers[k] + (phi[k] - kPi / 2.0) / spec.scalings[k]);
        }
    }
    return psi;
}

/// Spherical polar to embedding coordinates:
/// x_0 = cos phi_0, x_k = (prod_{j<k} sin phi_j) cos phi_k, last = full product.
inline SpherePoint polar_to_cartesian(const PolarPoint& phi) {
    const Eigen::Index D = phi.size();
    if (D < 1) throw InvalidInput("polar_to_cartesian: empty input");
    SpherePoint x(D + 1);
    double prod = 1.0;
    for (Eigen::Index k = 0; k < D; ++k) {
        x[k] = prod * std::cos(phi[k]);
        prod *= std::sin(phi[k]);
    }
    x[D] = prod;
    return x;
}

/// Inverse of polar_to_cartesian away from the coordinate degeneracies.
/// Throws PolarDegenerate when a prefix product of sines falls below 1e-12.
inline PolarPoint cartesian_to_polar(const SpherePoint& x) {
    const Eigen::Index D = x.size() - 1;
    if (D < 1) throw InvalidInput("cartesian_to_polar: need at least 2 components");
    PolarPoint phi(D);
    double prod = 1.0;
    for (Eigen::Index k = 0; k + 1 < D; ++k) {
        if (prod < 1e-12)
            throw PolarDegenerate("cartesian_to_polar: degenerate at slot " + std::to_string(k));
        phi[k] = std::acos(std::clamp(x[k] / prod, -1.0, 1.0));
        prod *= std::sin(phi[k]);
    }
    if (prod < 1e-12)
        throw PolarDegenerate("cartesian_to_polar: degenerate at slot " + std::to_string(D - 1));
    phi[D - 1] = wrap_angle(std::atan2(x[D], x[D - 1]));
    return phi;
}

namespace detail {

/// Spherical distance from x to the singular component {phi_slot = 0}
/// (`positive_side`) or {phi_slot = pi}. These sets are hemispheres of the
/// coordinate subsphere spanned by the leading block, so the minimization has
/// a closed form.
inline double distance_to_wall(const SpherePoint& x, int slot, bool positive_side) {
    const Eigen::Index j = slot;  // wall constrains cartesian coordinates > j to zero
    const double sign = positive_side ? 1.0 : -1.0;
    if (j == 0) return std::acos(std::clamp(sign * x[0], -1.0, 1.0));
    const double block = x.head(j + 1).norm();
    if (sign * x[j] >= 0.0) return std::acos(std::min(1.0, block));
    return std::acos(std::min(1.0, x.head(j).norm()));
}

}  // namespace detail

/// Distance on the self-glued sphere: the spherical arc, shortened by paths
/// through an identified boundary pair where that is closer. The wall passage
/// is scored as d(x, wall_0) + d(y, wall_pi) (and swapped), which is what the
/// projection step needs for its comparisons.
inline double glued_distance(const DeformationSpec& spec, const SpherePoint& x,
                             const SpherePoint& y) {
    cartesian_to_polar(x);  // validate: propagate PolarDegenerate for boundary points
    cartesian_to_polar(y);
    double best = std::acos(std::clamp(x.dot(y), -1.0, 1.0));
    for (int slot : spec.glued_slots) {
        const double a = detail::distance_to_wall(x, slot, true) +
                         detail::distance_to_wall(y, slot, false);
        const double b = detail::distance_to_wall(x, slot, false) +
                         detail::distance_to_wall(y, slot, true);
        best = std::min(best, std::min(a, b));
    }
    return best;
}

/// The torus metric pulled back through the chart:
/// delta~(x, y) = delta(P^{-1} x, P^{-1} y).
inline double deformed_metric(const DeformationSpec& spec, const SpherePoint& x,
                              const SpherePoint& y) {
    const TorusPoint px = inverse_deform(spec, cartesian_to_polar(x));
    const TorusPoint py = inverse_deform(spec, cartesian_to_polar(y));
    return torus_distance(px, py);
}

/// Chart applied to a whole data set; rows are embedded sphere points.
inline Eigen::MatrixXd deform_data(const DeformationSpec& spec, const TorusData& data,
                                   bool* clamped = nullptr) {
    Eigen::MatrixXd out(data.rows(), data.cols() + 1);
    if (clamped) *clamped = false;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        bool c = false;
        out.row(i) = polar_to_cartesian(deform(spec, data.row(i).transpose(), &c)).transpose();
        if (clamped && c) *clamped = true;
    }
    return out;
}

}  // namespace tpca
