#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "tpca/errors.hpp"
#include "tpca/optim.hpp"
#include "tpca/rng.hpp"
#include "tpca/subsphere.hpp"

namespace tpca {

/// 95% quantile of chi-square with one degree of freedom, the cutoff of the
/// likelihood ratio decision.
inline double chi2_threshold() {
    static const double q = boost::math::quantile(boost::math::chi_squared(1.0), 0.95);
    return q;
}

/// log of the folded normal density F(r; rho, sigma) = |N(rho sigma, sigma^2)|,
/// evaluated through the cosh form so large r*rho/sigma stays finite.
inline double folded_normal_log_pdf(double r, double rho, double sigma) {
    // 2/(sqrt(2 pi) sigma) * exp(-r^2/2s^2 - rho^2/2) * cosh(r rho / s), with
    // ln cosh z = |z| + ln(1 + e^{-2|z|}) - ln 2
    const double z = std::abs(r * rho / sigma);
    return -0.5 * std::log(kTwoPi) - std::log(sigma) - r * r / (2.0 * sigma * sigma) -
           rho * rho / 2.0 + z + std::log1p(std::exp(-2.0 * z));
}

inline double folded_normal_pdf(double r, double rho, double sigma) {
    return std::exp(folded_normal_log_pdf(r, rho, sigma));
}

namespace detail {

/// ln of integral_0^pi sin^{d-1}(r) F(r; rho, sigma) dr, computed on a scaled
/// integrand so that concentrated shapes (tiny sigma) neither vanish nor
/// overflow. Integration is split at the folded-normal bump so the adaptive
/// rule cannot step over it.
inline double log_shape_integral(double rho, double sigma, int d) {
    auto log_g = [&](double r) {
        if (r <= 0.0 || r >= kPi) return -std::numeric_limits<double>::infinity();
        return (d - 1) * std::log(std::sin(r)) + folded_normal_log_pdf(r, rho, sigma);
    };

    const double bump = rho * sigma;
    double scale = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < 64; ++i)
        scale = std::max(scale, log_g(kPi * static_cast<double>(i) / 64.0));
    if (bump > 0.0 && bump < kPi) scale = std::max(scale, log_g(bump));

    std::vector<double> cuts{0.0, kPi};
    for (double c : {bump - 12.0 * sigma, bump + 12.0 * sigma})
        if (c > 0.0 && c < kPi) cuts.push_back(c);
    if (bump > kPi) {
        // the sin factor and the off-domain bump balance in a spike just
        // below pi; width sigma^2 / (bump - pi)
        const double w = sigma * sigma / (bump - kPi);
        const double r_star = kPi - w;
        if (r_star > 0.0) {
            scale = std::max(scale, log_g(r_star));
            const double left = r_star - 10.0 * w;
            if (left > 0.0) cuts.push_back(left);
        }
    }
    if (!std::isfinite(scale)) throw NumericError("log_shape_integral: integrand vanished");
    std::sort(cuts.begin(), cuts.end());

    auto f = [&](double r) {
        const double lg = log_g(r);
        // the cap only binds if every probe missed the maximum by >700 nats,
        // deep in parameter corners the optimizer is being pushed out of
        return std::isfinite(lg) ? std::exp(std::min(lg - scale, 700.0)) : 0.0;
    };
    double total = 0.0;
    for (size_t s = 0; s + 1 < cuts.size(); ++s) {
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
            f, cuts[s], cuts[s + 1], 10, 1e-11, &err);
        if (!std::isfinite(total)) throw NumericError("log_shape_integral: quadrature failed");
    }
    if (total <= 0.0) throw NumericError("log_shape_integral: nonpositive integral");
    return scale + std::log(total);
}

}  // namespace detail

/// ln C(rho, sigma): normalization of the angular-distance density on S^d,
/// C = sqrt(2 pi) sigma * integral_0^pi sin^{d-1}(r) F(r) dr.
inline double log_radial_normalization(double rho, double sigma, int d) {
    return 0.5 * std::log(kTwoPi) + std::log(sigma) + detail::log_shape_integral(rho, sigma, d);
}

/// Density of the angular distance r on [0, pi]:
/// f(r) = sqrt(2 pi) sigma / C * sin^{d-1}(r) * F(r; rho, sigma).
inline double marginal_f(double r, double rho, double sigma, int d) {
    if (d < 2) throw InvalidInput("marginal_f: d must be >= 2");
    if (r <= 0.0 || r >= kPi) return 0.0;
    const double log_c = log_radial_normalization(rho, sigma, d);
    return std::exp(0.5 * std::log(kTwoPi) + std::log(sigma) +
                    (d - 1) * std::log(std::sin(r)) + folded_normal_log_pdf(r, rho, sigma) -
                    log_c);
}

struct FoldedNormalFit {
    double rho = 0.0;
    double sigma = 0.0;
    double log_likelihood = 0.0;
    double normalization = 0.0;  ///< C(rho, sigma)
    bool sigma_floored = false;
    bool converged = true;
};

enum class RhoConstraint { Free, FixedOne, AtLeastOne };

namespace detail {

struct DistanceStats {
    Eigen::VectorXd r;
    double sum_sq = 0.0;
    double sum_log_sin = 0.0;
    int n = 0;
};

inline DistanceStats distance_stats(const Eigen::VectorXd& r) {
    DistanceStats s;
    s.r = r;
    s.n = static_cast<int>(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        s.sum_sq += r[i] * r[i];
        s.sum_log_sin += std::log(std::sin(r[i]));
    }
    return s;
}

inline double log_likelihood(const DistanceStats& s, double rho, double sigma, int d) {
    const double n = static_cast<double>(s.n);
    double acc = -n * log_radial_normalization(rho, sigma, d) + (d - 1) * s.sum_log_sin -
                 n * rho * rho / 2.0 - s.sum_sq / (2.0 * sigma * sigma);
    for (Eigen::Index i = 0; i < s.r.size(); ++i) {
        const double z = std::abs(s.r[i] * rho / sigma);
        acc += z;
        if (z < 18.0) acc += std::log1p(std::exp(-2.0 * z));  // below double resolution beyond
    }
    return acc;
}

}  // namespace detail

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kSigmaCeil = 10.0;
inline constexpr double kRhoCeil = 1e3;

/// Maximum likelihood fit of the angular-distance density under a constraint
/// on rho. Nelder-Mead over (rho, ln sigma) from three seeded starts, with a
/// one-dimensional polish of each coordinate; for the one-sided constraint the
/// boundary rho = 1 competes as a candidate.
inline FoldedNormalFit mle_fit(const Eigen::VectorXd& r, int d,
                               RhoConstraint constraint = RhoConstraint::Free) {
    if (r.size() < 2) throw InvalidInput("mle_fit: need at least 2 distances");
    for (Eigen::Index i = 0; i < r.size(); ++i)
        if (!(r[i] > 0.0 && r[i] < kPi)) throw InvalidInput("mle_fit: distances must be in (0, pi)");
    const auto stats = detail::distance_stats(r);

    const double rho_lo = constraint == RhoConstraint::AtLeastOne ? 1.0 : 0.0;
    const double ls_lo = std::log(kSigmaFloor), ls_hi = std::log(kSigmaCeil);

    auto fit_sigma_at = [&](double rho) {
        const double ls = scan_then_brent(
            [&](double l) { return -detail::log_likelihood(stats, rho, std::exp(l), d); }, ls_lo,
            ls_hi, 24, 1e-10);
        return ls;
    };

    FoldedNormalFit out;
    if (constraint == RhoConstraint::FixedOne) {
        const double ls = fit_sigma_at(1.0);
        out.rho = 1.0;
        out.sigma = std::exp(ls);
    } else {
        const double mean = r.mean();
        const double sd = std::max(std::sqrt((stats.sum_sq / stats.n) - mean * mean), 1e-5);
        const double rho0 = std::clamp(mean / sd, rho_lo, kRhoCeil);

        auto neg = [&](const Eigen::VectorXd& p) {
            return -detail::log_likelihood(stats, p[0], std::exp(p[1]), d);
        };
        Eigen::VectorXd lo(2), hi(2), step(2);
        lo << rho_lo, ls_lo;
        hi << kRhoCeil, ls_hi;
        step << std::max(0.15 * rho0, 0.15), 0.3;

        NelderMeadResult best;
        bool converged = false;
        const double scales[3][2] = {{1.0, 1.0}, {0.5, 2.0}, {2.0, 0.5}};
        for (auto& sc : scales) {
            Eigen::VectorXd start(2);
            start << std::clamp(rho0 * sc[0], rho_lo, kRhoCeil),
                std::clamp(std::log(sd * sc[1]), ls_lo, ls_hi);
            const auto res = nelder_mead(neg, start, lo, hi, step, 3e-10, 250);
            converged = converged || res.converged;
            if (res.value < best.value) best = res;
        }
        if (!converged) throw FitFailure("mle_fit: no start converged");

        // coordinate polish; keep whichever of the polished and raw simplex
        // optima scores higher
        double rho = best.x[0];
        double ls = fit_sigma_at(rho);
        rho = brent_minimize(
            [&](double p) { return -detail::log_likelihood(stats, p, std::exp(ls), d); },
            std::max(rho_lo, rho - 0.5), std::min(kRhoCeil, rho + 0.5), 1e-11);
        ls = fit_sigma_at(rho);
        if (-best.value > detail::log_likelihood(stats, rho, std::exp(ls), d)) {
            rho = best.x[0];
            ls = best.x[1];
        }
        if (constraint == RhoConstraint::AtLeastOne) {
            const double ls1 = fit_sigma_at(1.0);
            if (detail::log_likelihood(stats, 1.0, std::exp(ls1), d) >
                detail::log_likelihood(stats, rho, std::exp(ls), d)) {
                rho = 1.0;
                ls = ls1;
            }
        }
        out.rho = rho;
        out.sigma = std::exp(ls);
    }
    out.sigma_floored = out.sigma <= kSigmaFloor * (1.0 + 1e-9);
    out.log_likelihood = detail::log_likelihood(stats, out.rho, out.sigma, d);
    out.normalization = std::exp(log_radial_normalization(out.rho, out.sigma, d));
    return out;
}

enum class SphereVerdict { Small, Great };

struct TestVerdict {
    SphereVerdict decision = SphereVerdict::Great;
    double lambda = 0.0;
    double rho_mle = 0.0;
    double sigma_mle = 0.0;
    double threshold = 0.0;
    bool fit_failed = false;
};

/// Small-vs-great subsphere decision on the distances r_i from the fitted
/// small-subsphere axis. A free fit with rho < 1 (density peaked at the
/// axis) rejects the small sphere outright; otherwise the likelihood ratio
/// against the constrained rho = 1 family decides at the chi-square 95% cut.
inline TestVerdict small_sphere_test(const Eigen::VectorXd& distances, int d) {
    TestVerdict v;
    v.threshold = chi2_threshold();

    Eigen::VectorXd r = distances;
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = std::clamp(r[i], 1e-12, kPi - 1e-12);

    FoldedNormalFit free;
    try {
        free = mle_fit(r, d, RhoConstraint::Free);
    } catch (const FitFailure&) {
        v.fit_failed = true;
        return v;  // fall back to a great sphere, flagged
    }
    v.rho_mle = free.rho;
    v.sigma_mle = free.sigma;
    if (free.rho < 1.0) return v;  // great, no ratio needed

    // free optimum lies in the closure of (1, inf), so it is the one-sided sup
    FoldedNormalFit null;
    try {
        null = mle_fit(r, d, RhoConstraint::FixedOne);
    } catch (const FitFailure&) {
        v.fit_failed = true;
        return v;
    }
    v.lambda = std::max(0.0, 2.0 * (free.log_likelihood - null.log_likelihood));
    v.decision = v.lambda > v.threshold ? SphereVerdict::Small : SphereVerdict::Great;
    return v;
}

/// Uniform direction on S^d (embedded in R^{d+1}).
inline Eigen::VectorXd random_sphere_point(Rng& rng, int d) {
    Eigen::VectorXd v(d + 1);
    double n2 = 0.0;
    do {
        for (int i = 0; i <= d; ++i) v[i] = rng.normal();
        n2 = v.norm();
    } while (n2 < 1e-12);
    return v / n2;
}

/// Null-model cluster: isotropic Gaussian in the tangent plane at a random
/// center, truncated at radius 2 sigma, carried to the sphere orthogonally
/// (along the plane normal): x = v + sqrt(1 - |v|^2) c. Angular distance from
/// the center is asin(|v|), so the cloud stays within asin(2 sigma).
inline Eigen::MatrixXd simulate_null_cluster(int n, double sigma_t, Rng& rng, int d = 2) {
    if (!(2.0 * sigma_t < 1.0)) throw InvalidInput("simulate_null_cluster: 2*sigma must be < 1");
    const Eigen::VectorXd center = random_sphere_point(rng, d);
    const Eigen::MatrixXd frame = detail::axis_to_pole_frame(center);  // cols 0..d-1 tangent
    Eigen::MatrixXd out(n, d + 1);
    Eigen::VectorXd v(d);
    for (int i = 0; i < n; ++i) {
        do {
            for (int k = 0; k < d; ++k) v[k] = sigma_t * rng.normal();
        } while (v.norm() > 2.0 * sigma_t);
        Eigen::VectorXd p = std::sqrt(std::max(0.0, 1.0 - v.squaredNorm())) * center;
        for (int k = 0; k < d; ++k) p += v[k] * frame.col(k);
        out.row(i) = p.transpose();
    }
    return out;
}

/// Ring-shaped cluster: uniform tangent direction, plane radius normal around
/// mu_r truncated to the unit disk (where the orthogonal lift is defined),
/// lifted like the null model.
inline Eigen::MatrixXd simulate_ring_cluster(int n, double mu_r, double sigma_r, Rng& rng,
                                             int d = 2) {
    const Eigen::VectorXd center = random_sphere_point(rng, d);
    const Eigen::MatrixXd frame = detail::axis_to_pole_frame(center);
    Eigen::MatrixXd out(n, d + 1);
    Eigen::VectorXd w(d);
    for (int i = 0; i < n; ++i) {
        double radius = 0.0;
        do {
            radius = mu_r + sigma_r * rng.normal();
        } while (radius <= 0.0 || radius >= 1.0);
        double nw = 0.0;
        do {
            for (int k = 0; k < d; ++k) w[k] = rng.normal();
            nw = w.norm();
        } while (nw < 1e-12);
        Eigen::VectorXd p = std::sqrt(1.0 - radius * radius) * center;
        for (int k = 0; k < d; ++k) p += radius * (w[k] / nw) * frame.col(k);
        out.row(i) = p.transpose();
    }
    return out;
}

struct ErrorRateRow {
    int size = 0;
    double kind1 = 0.0;  ///< null clusters judged small
    double kind2 = 0.0;  ///< ring clusters judged great
    double se1 = 0.0;
    double se2 = 0.0;
};

/// Simulation study of the test's error rates: per cluster size, the fraction
/// of null clusters accepted as small spheres and of ring clusters rejected.
/// Each trial fits the small subsphere first and feeds the axis distances to
/// the test, mirroring the nesting step.
inline std::vector<ErrorRateRow> error_rate_study(const std::vector<int>& sizes, int trials,
                                                  std::uint64_t seed, int d = 2) {
    std::vector<ErrorRateRow> rows;
    for (size_t si = 0; si < sizes.size(); ++si) {
        const int n = sizes[si];
        ErrorRateRow row;
        row.size = n;
        int small_on_null = 0, great_on_ring = 0;
        for (int t = 0; t < trials; ++t) {
            {
                Rng rng(Rng::derive(seed, si, 0, static_cast<std::uint64_t>(t)));
                const double sigma = rng.uniform(0.1, 0.45);
                const Eigen::MatrixXd pts = simulate_null_cluster(n, sigma, rng, d);
                try {
                    const auto fit = fit_subsphere(pts, Rng::derive(seed, si, 2, t));
                    const Eigen::VectorXd dist = detail::angles_to_axis(pts, fit.sub.axis);
                    if (small_sphere_test(dist, d).decision == SphereVerdict::Small)
                        ++small_on_null;
                } catch (const FitFailure&) {
                    // counts as a great verdict
                }
            }
            {
                Rng rng(Rng::derive(seed, si, 1, static_cast<std::uint64_t>(t)));
                const double mu_r = rng.uniform(0.1, 0.5);
                const double sigma_r = rng.uniform(0.01 * mu_r, 0.5 * mu_r);
                const Eigen::MatrixXd pts = simulate_ring_cluster(n, mu_r, sigma_r, rng, d);
                try {
                    const auto fit = fit_subsphere(pts, Rng::derive(seed, si, 3, t));
                    const Eigen::VectorXd dist = detail::angles_to_axis(pts, fit.sub.axis);
                    if (small_sphere_test(dist, d).decision == SphereVerdict::Great)
                        ++great_on_ring;
                } catch (const FitFailure&) {
                    ++great_on_ring;
                }
            }
        }
        row.kind1 = static_cast<double>(small_on_null) / trials;
        row.kind2 = static_cast<double>(great_on_ring) / trials;
        row.se1 = std::sqrt(row.kind1 * (1.0 - row.kind1) / trials);
        row.se2 = std::sqrt(row.kind2 * (1.0 - row.kind2) / trials);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tpca
