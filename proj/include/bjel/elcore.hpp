#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bjel/errors.hpp"
#include "bjel/math.hpp"

namespace bjel {

// Sample values (jackknife pseudo-values) with normalized weights and
// optional auxiliary vectors x_i whose population mean is known.
struct WeightedSample {
    std::vector<double> values;
    std::vector<double> norm_weights;
    Matrix aux;                    // n x k, empty when no auxiliary info
    std::vector<double> aux_mean;  // known population mean of the aux vector

    std::size_t n() const { return values.size(); }
    std::size_t aux_dim() const { return aux.cols; }
    bool has_aux() const { return !aux.empty(); }

    void validate() const {
        if (values.empty()) fail(errc::bad_request, "empty sample");
        if (norm_weights.size() != values.size())
            fail(errc::bad_request, "weights/values length mismatch");
        if (!all_finite(values)) fail(errc::invalid_input, "non-finite sample values");
        for (double w : norm_weights)
            if (!(w > 0.0) || !std::isfinite(w))
                fail(errc::non_positive_weight, "normalized weights must be strictly positive");
        if (std::abs(accurate_sum(norm_weights) - 1.0) > 1e-12)
            fail(errc::invalid_input, "normalized weights must sum to 1");
        if (aux.empty() != aux_mean.empty())
            fail(errc::bad_request, "aux matrix and aux mean must be given together");
        if (!aux.empty()) {
            if (aux.rows != values.size()) fail(errc::bad_request, "aux row count != n");
            if (aux_mean.size() != aux.cols) fail(errc::bad_request, "aux mean dimension mismatch");
            if (!all_finite(aux.data) || !all_finite(aux_mean))
                fail(errc::invalid_input, "non-finite auxiliary data");
        }
    }
};

// Solution of the inner EL optimization at a fixed theta. When theta is
// outside the convex hull of the constraint points the problem has no
// solution; that is reported via feasible=false, not an exception.
struct ELSolution {
    std::vector<double> lambda;  // multiplier(s), original scale
    std::vector<double> p;       // EL weights, w_i / (1 + lambda'u_i)
    double log_el = kNegInf;     // sum_i w_i log p_i (unscaled)
    bool feasible = false;
    int iterations = 0;
    double residual = 0.0;  // max-norm of the score at exit, max-standardized units
};

namespace detail {

// Scalar score g(mu) = sum w t / (1 + mu t) on the standardized points t;
// strictly decreasing on its open domain, +inf at the left end, -inf at the
// right, so a bracketed Newton/bisection hybrid cannot miss the root.
struct Score1D {
    std::span<const double> t;
    std::span<const double> w;

    double value(double mu) const {
        long double s = 0.0L;
        for (std::size_t i = 0; i < t.size(); ++i) s += static_cast<long double>(w[i]) * t[i] / (1.0 + mu * t[i]);
        return static_cast<double>(s);
    }
    double derivative(double mu) const {
        long double s = 0.0L;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double d = 1.0 + mu * t[i];
            s -= static_cast<long double>(w[i]) * t[i] * t[i] / (d * d);
        }
        return static_cast<double>(s);
    }
};

inline ELSolution finish_solution(const std::vector<double>& lambda,
                                  std::span<const double> denom,
                                  std::span<const double> w, int iters, double resid) {
    ELSolution sol;
    sol.lambda = lambda;
    sol.feasible = true;
    sol.iterations = iters;
    sol.residual = resid;
    sol.p.resize(w.size());
    long double le = 0.0L;
    for (std::size_t i = 0; i < w.size(); ++i) {
        sol.p[i] = w[i] / denom[i];
        le += static_cast<long double>(w[i]) * std::log(sol.p[i]);
    }
    sol.log_el = static_cast<double>(le);
    return sol;
}

}  // namespace detail

// Solves sum_i w_i (v_i - theta) / (1 + lambda (v_i - theta)) = 0.
// Feasible iff theta lies strictly inside (min v, max v).
inline ELSolution solve_lambda_1d(const WeightedSample& ws, double theta, double tol = 1e-10,
                                  int max_iter = 100, double lambda_init = 0.0) {
    ws.validate();
    if (!std::isfinite(theta)) fail(errc::invalid_input, "theta must be finite");

    const std::size_t n = ws.n();
    auto [vmin_it, vmax_it] = std::minmax_element(ws.values.begin(), ws.values.end());
    if (!(*vmin_it < theta && theta < *vmax_it)) return {};  // infeasible

    std::vector<double> u(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = ws.values[i] - theta;
        s = std::max(s, std::abs(u[i]));
    }
    for (double& ui : u) ui /= s;  // standardize so the score tolerance is scale-free

    detail::Score1D score{u, ws.norm_weights};
    double tmax = (*vmax_it - theta) / s;
    double tmin = (*vmin_it - theta) / s;
    const double lo = -1.0 / tmax;
    const double hi = -1.0 / tmin;

    int iters = 0;
    double g0 = score.value(0.0);
    double a, b;  // bracket with score(a) > 0 > score(b)
    if (std::abs(g0) <= tol) {
        std::vector<double> denom(n, 1.0);
        return detail::finish_solution({0.0}, denom, ws.norm_weights, 0, std::abs(g0));
    } else if (g0 > 0.0) {
        a = 0.0;
        b = hi;
        for (int k = 1; k <= 60; ++k) {
            double cand = hi * (1.0 - std::ldexp(1.0, -k));
            ++iters;
            if (score.value(cand) < 0.0) {
                b = cand;
                break;
            }
            a = cand;
        }
    } else {
        b = 0.0;
        a = lo;
        for (int k = 1; k <= 60; ++k) {
            double cand = lo * (1.0 - std::ldexp(1.0, -k));
            ++iters;
            if (score.value(cand) > 0.0) {
                a = cand;
                break;
            }
            b = cand;
        }
    }

    double x = lambda_init * s;
    if (!(a < x && x < b)) x = 0.5 * (a + b);
    double gx = 0.0;
    for (; iters < max_iter; ++iters) {
        gx = score.value(x);
        if (std::abs(gx) <= tol) {
            std::vector<double> denom(n);
            for (std::size_t i = 0; i < n; ++i) denom[i] = 1.0 + x * u[i];
            return detail::finish_solution({x / s}, denom, ws.norm_weights, iters, std::abs(gx));
        }
        if (gx > 0.0)
            a = x;
        else
            b = x;
        double xn = x - gx / score.derivative(x);
        if (!(a < xn && xn < b) || !std::isfinite(xn)) xn = 0.5 * (a + b);
        x = xn;
    }
    fail(errc::non_convergence,
         "1-d multiplier: residual " + std::to_string(std::abs(gx)) + " after " +
             std::to_string(max_iter) + " iterations");
}

namespace detail {

// Damped Newton for the vector dual: minimizes -sum w log(1 + lambda'u)
// over the open domain where every denominator stays positive. The rows of
// `u` are already column-standardized by the caller.
inline ELSolution solve_dual_newton(const Matrix& u, std::span<const double> w, double tol,
                                    int max_iter, std::vector<double> lambda0) {
    const std::size_t n = u.rows, d = u.cols;
    std::vector<double> lambda = std::move(lambda0);
    if (lambda.size() != d) lambda.assign(d, 0.0);

    std::vector<double> denom(n);
    auto denominators = [&](const std::vector<double>& lam, std::vector<double>& out) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            double t = 1.0;
            for (std::size_t j = 0; j < d; ++j) t += lam[j] * u(i, j);
            out[i] = t;
            dmin = std::min(dmin, t);
        }
        return dmin;
    };
    auto objective = [&](std::span<const double> den) {
        long double m = 0.0L;
        for (std::size_t i = 0; i < n; ++i) m -= static_cast<long double>(w[i]) * std::log(den[i]);
        return static_cast<double>(m);
    };

    if (denominators(lambda, denom) <= 0.0) {
        lambda.assign(d, 0.0);
        denominators(lambda, denom);
    }
    double m_cur = objective(denom);

    std::vector<double> grad(d), step(d), trial(d), trial_denom(n);
    double resid = 0.0, best_resid = std::numeric_limits<double>::infinity();
    int stall = 0;

    for (int it = 0; it < max_iter; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double mass = 0.0;  // sum of the implied EL weights w_i / denom_i
        Matrix hess(d, d);
        for (std::size_t i = 0; i < n; ++i) {
            double wi_t = w[i] / denom[i];
            double wi_t2 = wi_t / denom[i];
            mass += wi_t;
            for (std::size_t j = 0; j < d; ++j) {
                grad[j] += wi_t * u(i, j);
                for (std::size_t l = j; l < d; ++l) hess(j, l) += wi_t2 * u(i, j) * u(i, l);
            }
        }
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t l = 0; l < j; ++l) hess(j, l) = hess(l, j);

        resid = 0.0;
        for (double g : grad) resid = std::max(resid, std::abs(g));
        // The score also vanishes along recession directions when 0 is
        // outside the hull, but there the EL weights lose their mass; a true
        // interior root satisfies sum p = 1 - lambda'score = 1.
        if (resid <= tol && std::abs(mass - 1.0) <= 1e-8) {
            auto sol = finish_solution(lambda, denom, w, it, resid);
            return sol;
        }

        // Residual stopped improving: the origin is not interior to the
        // convex hull of the u_i and no multiplier exists.
        if (resid < best_resid * (1.0 - 1e-9)) {
            best_resid = resid;
            stall = 0;
        } else if (++stall >= 30) {
            ELSolution sol;
            sol.iterations = it;
            sol.residual = resid;
            return sol;
        }

        double lnorm = 0.0;
        for (double l : lambda) lnorm = std::max(lnorm, std::abs(l));
        if (lnorm > 1e8) {  // multiplier running to infinity along a recession direction
            ELSolution sol;
            sol.iterations = it;
            sol.residual = resid;
            return sol;
        }

        auto maybe_step = solve_linear(hess, grad);
        if (!maybe_step) fail(errc::singular_system, "EL Hessian numerically singular");
        step = *maybe_step;

        // Fraction-to-boundary: keep every denominator above 1e-10.
        double alpha = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double du = 0.0;
            for (std::size_t j = 0; j < d; ++j) du += step[j] * u(i, j);
            if (du < 0.0) alpha = std::min(alpha, 0.995 * (denom[i] - 1e-10) / (-du));
        }
        if (!(alpha > 0.0)) alpha = 0.0;

        double slope = 0.0;  // directional derivative of the objective along +step is -slope
        for (std::size_t j = 0; j < d; ++j) slope += grad[j] * step[j];

        // Near the optimum the objective decrease falls below double noise
        // and an Armijo test would reject the polishing steps; inside the
        // quadratic basin plain Newton is safe.
        if (resid <= 1e-5) {
            for (std::size_t j = 0; j < d; ++j) lambda[j] += alpha * step[j];
            if (denominators(lambda, denom) <= 0.0) {
                ELSolution sol;
                sol.iterations = it;
                sol.residual = resid;
                return sol;
            }
            m_cur = objective(denom);
            continue;
        }

        bool moved = false;
        while (alpha > 1e-18) {
            for (std::size_t j = 0; j < d; ++j) trial[j] = lambda[j] + alpha * step[j];
            if (denominators(trial, trial_denom) > 0.0) {
                double m_new = objective(trial_denom);
                if (m_new <= m_cur - 1e-4 * alpha * slope + 1e-15 * std::abs(m_cur)) {
                    lambda = trial;
                    denom.swap(trial_denom);
                    m_cur = m_new;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!moved) {
            ELSolution sol;  // wedged against the domain boundary
            sol.iterations = it;
            sol.residual = resid;
            return sol;
        }
    }
    fail(errc::non_convergence, "vector multiplier: residual " + std::to_string(resid) +
                                    " after " + std::to_string(max_iter) + " iterations");
}

// Shared entry point: builds the standardized constraint matrix, runs the
// Newton solve, and rescales the multiplier back to the original units.
inline ELSolution solve_dual(const Matrix& u_raw, std::span<const double> w, double tol,
                             int max_iter, std::vector<double> lambda_init) {
    const std::size_t n = u_raw.rows, d = u_raw.cols;
    std::vector<double> colscale(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) colscale[j] = std::max(colscale[j], std::abs(u_raw(i, j)));
    for (std::size_t j = 0; j < d; ++j)
        if (colscale[j] == 0.0) colscale[j] = 1.0;

    Matrix u(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) u(i, j) = u_raw(i, j) / colscale[j];

    if (!lambda_init.empty())
        for (std::size_t j = 0; j < d; ++j) lambda_init[j] *= colscale[j];

    ELSolution sol = solve_dual_newton(u, w, tol, max_iter, std::move(lambda_init));
    if (sol.feasible)
        for (std::size_t j = 0; j < d; ++j) sol.lambda[j] /= colscale[j];
    return sol;
}

}  // namespace detail

// Vector multiplier for the joint constraints sum p (v - theta) = 0 and
// sum p (x - aux_mean) = 0. Feasible iff 0 is interior to the hull of the
// combined constraint points. Without aux this degenerates to the 1-d case.
inline ELSolution solve_lambda_multi(const WeightedSample& ws, double theta, double tol = 1e-8,
                                     int max_iter = 100,
                                     std::vector<double> lambda_init = {}) {
    ws.validate();
    if (!std::isfinite(theta)) fail(errc::invalid_input, "theta must be finite");

    const std::size_t n = ws.n();
    const std::size_t k = ws.aux_dim();
    auto [vmin, vmax] = std::minmax_element(ws.values.begin(), ws.values.end());
    if (!(*vmin < theta && theta < *vmax)) return {};  // necessary in all cases

    Matrix u(n, 1 + k);
    for (std::size_t i = 0; i < n; ++i) {
        u(i, 0) = ws.values[i] - theta;
        for (std::size_t j = 0; j < k; ++j) u(i, 1 + j) = ws.aux(i, j) - ws.aux_mean[j];
    }
    return detail::solve_dual(u, ws.norm_weights, tol, max_iter, std::move(lambda_init));
}

// Profile log pseudo-empirical likelihood: scale * sum_i w_i log p_i(theta).
// Returns -inf outside the feasible hull; a (rare) non-converged inner solve
// is folded into the same sentinel so posterior grids never crash.
inline double profile_log_el(const WeightedSample& ws, double theta, double scale, bool use_aux) {
    if (!(scale > 0.0)) fail(errc::bad_request, "scale must be positive");
    if (use_aux && !ws.has_aux()) fail(errc::bad_request, "auxiliary data required");
    try {
        ELSolution sol = use_aux ? solve_lambda_multi(ws, theta) : solve_lambda_1d(ws, theta);
        return sol.feasible ? scale * sol.log_el : kNegInf;
    } catch (const error& e) {
        if (e.code() == errc::non_convergence) return kNegInf;
        throw;
    }
}

}  // namespace bjel
