#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace tpca {

/// Brent minimization on [a, b]; returns the argmin.
inline double brent_minimize(const std::function<double(double)>& f, double a, double b,
                             double tol = 1e-10, int max_iter = 200) {
    const double golden = 0.3819660112501051;
    double x = a + golden * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const double m = 0.5 * (a + b);
        const double tol1 = tol * std::abs(x) + 1e-14;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
        bool use_golden = true;
        if (std::abs(e) > tol1) {
            // trial parabolic fit through x, v, w
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double e_old = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
                use_golden = false;
            }
        }
        if (use_golden) {
            e = (x < m) ? b - x : a - x;
            d = golden * e;
        }
        const double u = (std::abs(d) >= tol1) ? x + d : x + ((d > 0.0) ? tol1 : -tol1);
        const double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return x;
}

/// Coarse scan followed by Brent refinement around the best bracket.
inline double scan_then_brent(const std::function<double(double)>& f, double a, double b,
                              int scan_points = 48, double tol = 1e-10) {
    double best_x = a, best_f = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan_points; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) / scan_points;
        const double v = f(x);
        if (v < best_f) { best_f = v; best_x = x; }
    }
    const double h = (b - a) / scan_points;
    return brent_minimize(f, std::max(a, best_x - h), std::min(b, best_x + h), tol);
}

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Nelder-Mead simplex with box clamping, for the low-dimensional likelihood
/// surfaces in this project.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& start, const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi,
                                    const Eigen::VectorXd& init_step, double ftol = 1e-11,
                                    int max_iter = 600) {
    const int n = static_cast<int>(start.size());
    auto clamp = [&](Eigen::VectorXd p) {
        for (int i = 0; i < n; ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
        return p;
    };

    std::vector<Eigen::VectorXd> pts(static_cast<size_t>(n + 1));
    std::vector<double> vals(static_cast<size_t>(n + 1));
    pts[0] = clamp(start);
    vals[0] = f(pts[0]);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd p = pts[0];
        p[i] += init_step[i];
        pts[static_cast<size_t>(i + 1)] = clamp(p);
        vals[static_cast<size_t>(i + 1)] = f(pts[static_cast<size_t>(i + 1)]);
    }

    NelderMeadResult res;
    auto order = [&]() {
        for (size_t i = 1; i < pts.size(); ++i) {  // insertion sort, simplex is tiny
            auto p = pts[i];
            auto v = vals[i];
            size_t j = i;
            while (j > 0 && vals[j - 1] > v) {
                pts[j] = pts[j - 1];
                vals[j] = vals[j - 1];
                --j;
            }
            pts[j] = p;
            vals[j] = v;
        }
    };
    order();

    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it;
        if (std::abs(vals.back() - vals.front()) <=
            ftol * (std::abs(vals.front()) + std::abs(vals.back()) + 1e-30)) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd refl = clamp(centroid + (centroid - pts.back()));
        const double f_refl = f(refl);
        if (f_refl < vals.front()) {
            const Eigen::VectorXd exp_p = clamp(centroid + 2.0 * (centroid - pts.back()));
            const double f_exp = f(exp_p);
            if (f_exp < f_refl) { pts.back() = exp_p; vals.back() = f_exp; }
            else { pts.back() = refl; vals.back() = f_refl; }
        } else if (f_refl < vals[vals.size() - 2]) {
            pts.back() = refl;
            vals.back() = f_refl;
        } else {
            const Eigen::VectorXd con = clamp(centroid + 0.5 * (pts.back() - centroid));
            const double f_con = f(con);
            if (f_con < vals.back()) { pts.back() = con; vals.back() = f_con; }
            else {
                for (size_t i = 1; i < pts.size(); ++i) {  // shrink
                    pts[i] = clamp(pts.front() + 0.5 * (pts[i] - pts.front()));
                    vals[i] = f(pts[i]);
                }
            }
        }
        order();
    }
    res.x = pts.front();
    res.value = vals.front();
    return res;
}

}  // namespace tpca
