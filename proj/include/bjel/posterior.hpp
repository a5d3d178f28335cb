#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bjel/elcore.hpp"
#include "bjel/errors.hpp"
#include "bjel/math.hpp"

namespace bjel {

enum class Method { jel, bjel, jel_d, bjel_d, jel_w, bjel_w };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::jel:    return "jel";
        case Method::bjel:   return "bjel";
        case Method::jel_d:  return "jel_d";
        case Method::bjel_d: return "bjel_d";
        case Method::jel_w:  return "jel_w";
        case Method::bjel_w: return "bjel_w";
    }
    return "?";
}

inline const char* method_label(Method m) {
    switch (m) {
        case Method::jel:    return "JEL";
        case Method::bjel:   return "BJEL";
        case Method::jel_d:  return "JEL_d";
        case Method::bjel_d: return "BJEL_d";
        case Method::jel_w:  return "JEL_w";
        case Method::bjel_w: return "BJEL_w";
    }
    return "?";
}

inline Method method_from_string(std::string_view s) {
    for (Method m : {Method::jel, Method::bjel, Method::jel_d, Method::bjel_d, Method::jel_w,
                     Method::bjel_w})
        if (s == to_string(m)) return m;
    fail(errc::bad_request, "unknown method '" + std::string(s) + "'");
}

inline bool is_bayesian(Method m) {
    return m == Method::bjel || m == Method::bjel_d || m == Method::bjel_w;
}

// Normalized posterior on a uniform theta grid. Infeasible thetas carry
// log-density -inf and density exactly zero; trapezoid mass is 1.
struct PosteriorGrid {
    std::vector<double> thetas;
    std::vector<double> log_density;  // unnormalized profile log-EL
    std::vector<double> density;      // trapezoid-normalized
    std::vector<double> cdf;
    double center = 0.0;      // EL maximizer used for grid placement
    double scale_used = 0.0;  // n, n*, or the calibration scale factor
    std::size_t feasible_points = 0;
    std::string diagnostics;

    double spacing() const { return thetas[1] - thetas[0]; }

    double quantile(double alpha) const {
        if (alpha <= cdf.front()) return thetas.front();
        if (alpha >= cdf.back()) return thetas.back();
        auto it = std::lower_bound(cdf.begin(), cdf.end(), alpha);
        std::size_t j = static_cast<std::size_t>(it - cdf.begin());
        double c0 = cdf[j - 1], c1 = cdf[j];
        if (c1 <= c0) return thetas[j];
        double t = (alpha - c0) / (c1 - c0);
        return thetas[j - 1] + t * (thetas[j] - thetas[j - 1]);
    }

    double cdf_at(double theta) const {
        if (theta <= thetas.front()) return 0.0;
        if (theta >= thetas.back()) return 1.0;
        auto it = std::upper_bound(thetas.begin(), thetas.end(), theta);
        std::size_t j = static_cast<std::size_t>(it - thetas.begin());
        double t = (theta - thetas[j - 1]) / (thetas[j] - thetas[j - 1]);
        return cdf[j - 1] + t * (cdf[j] - cdf[j - 1]);
    }

    double mode() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < density.size(); ++i)
            if (density[i] > density[best]) best = i;
        return thetas[best];
    }

    double mean() const {
        long double s = 0.0L;
        double h = spacing();
        for (std::size_t i = 0; i + 1 < thetas.size(); ++i)
            s += 0.5L * h * (thetas[i] * density[i] + thetas[i + 1] * density[i + 1]);
        return static_cast<double>(s);
    }

    // Normalizes raw log-density values over a given grid (log-sum-exp shift
    // followed by trapezoid scaling) and fills density and cdf.
    static PosteriorGrid from_log_density(std::vector<double> thetas, std::vector<double> logd,
                                          double center, double scale_used) {
        PosteriorGrid pg;
        pg.thetas = std::move(thetas);
        pg.log_density = std::move(logd);
        pg.center = center;
        pg.scale_used = scale_used;

        double peak = kNegInf;
        for (double v : pg.log_density)
            if (std::isfinite(v)) {
                peak = std::max(peak, v);
                ++pg.feasible_points;
            }
        if (pg.feasible_points < 5)
            fail(errc::degenerate_posterior, "fewer than 5 feasible grid points");

        const std::size_t g = pg.thetas.size();
        const double h = pg.thetas[1] - pg.thetas[0];
        pg.density.resize(g);
        for (std::size_t i = 0; i < g; ++i)
            pg.density[i] = std::isfinite(pg.log_density[i]) ? std::exp(pg.log_density[i] - peak) : 0.0;

        long double total = 0.0L;
        for (std::size_t i = 0; i + 1 < g; ++i) total += 0.5L * h * (pg.density[i] + pg.density[i + 1]);
        if (!(total > 0.0L)) fail(errc::degenerate_posterior, "posterior mass underflowed");
        for (double& d : pg.density) d = static_cast<double>(d / total);

        pg.cdf.resize(g);
        long double acc = 0.0L;
        pg.cdf[0] = 0.0;
        for (std::size_t i = 1; i < g; ++i) {
            acc += 0.5L * h * (pg.density[i - 1] + pg.density[i]);
            pg.cdf[i] = static_cast<double>(acc);
        }
        double tail = pg.cdf.back();
        if (tail > 0.0)
            for (double& c : pg.cdf) c /= tail;
        return pg;
    }

    static PosteriorGrid from_density(std::vector<double> thetas, std::span<const double> dens,
                                      double center, double scale_used) {
        std::vector<double> logd(dens.size());
        for (std::size_t i = 0; i < dens.size(); ++i)
            logd[i] = dens[i] > 0.0 ? std::log(dens[i]) : kNegInf;
        return from_log_density(std::move(thetas), std::move(logd), center, scale_used);
    }
};

struct IntervalResult {
    double lower = 0.0;
    double upper = 0.0;
    Method method = Method::bjel;
    double level = 0.95;
    std::string diagnostics;
};

// EL maximizer and the profile value there. Without auxiliary constraints
// the maximizer is the weighted mean of the pseudo-values; with them it is
// the mean under the aux-constrained EL weights (the GREG-type estimator).
struct ELMaximum {
    double theta_hat = 0.0;
    double log_el = 0.0;  // unscaled sum w log p at the maximizer
};

inline ELMaximum el_maximizer(const WeightedSample& ws, bool use_aux) {
    ws.validate();
    ELMaximum out;
    if (!use_aux || !ws.has_aux()) {
        if (use_aux) fail(errc::bad_request, "auxiliary data required");
        out.theta_hat = weighted_mean(ws.values, ws.norm_weights);
        long double le = 0.0L;
        for (double w : ws.norm_weights) le += static_cast<long double>(w) * std::log(w);
        out.log_el = static_cast<double>(le);
        return out;
    }
    const std::size_t n = ws.n(), k = ws.aux_dim();
    Matrix u(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) u(i, j) = ws.aux(i, j) - ws.aux_mean[j];
    ELSolution sol = detail::solve_dual(u, ws.norm_weights, 1e-10, 200, {});
    if (!sol.feasible)
        fail(errc::degenerate_posterior, "auxiliary mean outside the sample convex hull");
    out.theta_hat = weighted_mean(ws.values, sol.p);
    out.log_el = sol.log_el;
    return out;
}

namespace detail {

// Profile log-EL over an outward sweep with multiplier warm starts. Once a
// point falls outside the feasible hull every farther point does too.
inline std::vector<double> sweep_log_el(const WeightedSample& ws, std::span<const double> grid,
                                        std::size_t center_idx, double scale, bool use_aux) {
    std::vector<double> logd(grid.size(), kNegInf);
    auto run_side = [&](std::size_t begin, bool rightward) {
        std::vector<double> warm;
        double warm1 = 0.0;
        std::size_t i = begin;
        while (true) {
            double theta = grid[i];
            bool ok = false;
            try {
                if (use_aux) {
                    ELSolution sol = solve_lambda_multi(ws, theta, 1e-8, 100, warm);
                    if (sol.feasible) {
                        logd[i] = scale * sol.log_el;
                        warm = sol.lambda;
                        ok = true;
                    }
                } else {
                    ELSolution sol = solve_lambda_1d(ws, theta, 1e-10, 100, warm1);
                    if (sol.feasible) {
                        logd[i] = scale * sol.log_el;
                        warm1 = sol.lambda[0];
                        ok = true;
                    }
                }
            } catch (const error& e) {
                if (e.code() != errc::non_convergence) throw;
            }
            if (!ok) break;  // hull edge (or a wedged solve at its brink)
            if (rightward) {
                if (++i >= grid.size()) break;
            } else {
                if (i-- == 0) break;
            }
        }
    };
    run_side(center_idx, true);
    if (center_idx > 0) run_side(center_idx - 1, false);
    return logd;
}

}  // namespace detail

// Flat-prior posterior over theta: density proportional to exp of the scaled
// profile log-EL, normalized on a grid centered at the EL maximizer and
// spanning +-6 SE (doubled up to 3 times while boundary mass exceeds 1e-6).
inline PosteriorGrid build_posterior(const WeightedSample& ws, double scale, bool use_aux,
                                     std::size_t grid_size = 2001) {
    if (!(scale > 0.0) || !std::isfinite(scale)) fail(errc::bad_request, "scale must be positive");
    if (grid_size < 11 || grid_size % 2 == 0)
        fail(errc::bad_request, "grid size must be odd and >= 11");

    ELMaximum top = el_maximizer(ws, use_aux);
    long double s2 = 0.0L;
    for (std::size_t i = 0; i < ws.n(); ++i) {
        double d = ws.values[i] - top.theta_hat;
        s2 += static_cast<long double>(ws.norm_weights[i]) * d * d;
    }
    double se = std::sqrt(static_cast<double>(s2) / scale);
    if (!(se > 0.0)) fail(errc::degenerate_posterior, "pseudo-values have zero spread");

    const std::size_t g = grid_size;
    const std::size_t mid = g / 2;
    double span = 6.0 * se;
    std::string note;

    for (int attempt = 0;; ++attempt) {
        std::vector<double> grid(g);
        double h = 2.0 * span / static_cast<double>(g - 1);
        for (std::size_t i = 0; i < g; ++i)
            grid[i] = top.theta_hat + (static_cast<double>(i) - static_cast<double>(mid)) * h;

        auto logd = detail::sweep_log_el(ws, grid, mid, scale, use_aux);
        PosteriorGrid pg = PosteriorGrid::from_log_density(std::move(grid), std::move(logd),
                                                           top.theta_hat, scale);
        double edge_mass = 0.5 * h * (pg.density[0] + pg.density[1]) +
                           0.5 * h * (pg.density[g - 2] + pg.density[g - 1]);
        if (edge_mass <= 1e-6 || attempt == 3) {
            if (edge_mass > 1e-6) note = "boundary mass still above 1e-6 after 3 extensions";
            pg.diagnostics = note;
            return pg;
        }
        span *= 2.0;
    }
}

inline double posterior_quantile(const PosteriorGrid& pg, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::bad_request, "alpha must be in (0,1)");
    return pg.quantile(alpha);
}

inline IntervalResult credible_interval(const PosteriorGrid& pg, double level = 0.95,
                                        Method tag = Method::bjel) {
    if (!(level > 0.0 && level < 1.0)) fail(errc::bad_request, "level must be in (0,1)");
    IntervalResult out;
    out.method = tag;
    out.level = level;
    out.lower = pg.quantile(0.5 * (1.0 - level));
    out.upper = pg.quantile(0.5 * (1.0 + level));
    out.diagnostics = pg.diagnostics;
    return out;
}

inline double monahan_boos_H(const PosteriorGrid& pg, double theta_true) {
    return pg.cdf_at(theta_true);
}

// Finds both roots of 2{l(theta_hat) - l(theta)} = chi^2_1(level) by
// bracketed bisection, one on each side of the maximizer. Exposed with a
// caller-supplied profile so surrogates can be swapped in.
inline IntervalResult invert_el_ratio(const std::function<double(double)>& log_el,
                                      double log_el_max, double theta_hat, double se,
                                      double lo_edge, double hi_edge, double level, Method tag) {
    if (!(se > 0.0)) fail(errc::degenerate_variance, "zero spread: ratio interval undefined");
    const double target = chi2_quantile_1df(level);
    auto ratio = [&](double theta) {
        double l = log_el(theta);
        return std::isfinite(l) ? 2.0 * (log_el_max - l) : std::numeric_limits<double>::infinity();
    };

    IntervalResult out;
    out.method = tag;
    out.level = level;

    const double range = hi_edge - lo_edge;
    auto solve_side = [&](bool lower) {
        const double edge = lower ? lo_edge + 1e-9 * range : hi_edge - 1e-9 * range;
        double step = se;
        double outer = lower ? std::max(theta_hat - step, edge) : std::min(theta_hat + step, edge);
        while (ratio(outer) < target) {
            if (outer == edge) {
                out.diagnostics += std::string(lower ? "lower" : "upper") +
                                   " endpoint pinned at the feasibility edge; ";
                return edge;
            }
            step *= 2.0;
            outer = lower ? std::max(theta_hat - step, edge) : std::min(theta_hat + step, edge);
        }
        double inner = theta_hat;
        const double tol = 1e-6 * se;
        while (std::abs(outer - inner) > tol) {
            double mid = 0.5 * (outer + inner);
            if (ratio(mid) >= target)
                outer = mid;
            else
                inner = mid;
        }
        return 0.5 * (outer + inner);
    };

    out.lower = solve_side(true);
    out.upper = solve_side(false);
    return out;
}

// Frequentist comparator: chi-square calibrated EL ratio interval.
inline IntervalResult jel_interval(const WeightedSample& ws, double scale, bool use_aux,
                                   double level = 0.95, Method tag = Method::jel) {
    if (!(scale > 0.0)) fail(errc::bad_request, "scale must be positive");
    ELMaximum top = el_maximizer(ws, use_aux);

    long double s2 = 0.0L;
    for (std::size_t i = 0; i < ws.n(); ++i) {
        double d = ws.values[i] - top.theta_hat;
        s2 += static_cast<long double>(ws.norm_weights[i]) * d * d;
    }
    double se = std::sqrt(static_cast<double>(s2) / scale);

    auto [vmin, vmax] = std::minmax_element(ws.values.begin(), ws.values.end());
    auto logel = [&ws, scale, use_aux](double theta) {
        return profile_log_el(ws, theta, scale, use_aux);
    };
    return invert_el_ratio(logel, scale * top.log_el, top.theta_hat, se, *vmin, *vmax, level, tag);
}

}  // namespace bjel
