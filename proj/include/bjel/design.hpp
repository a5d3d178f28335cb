#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bjel/elcore.hpp"
#include "bjel/errors.hpp"
#include "bjel/math.hpp"

namespace bjel {

enum class DesignKind { srswor, rao_sampford };

struct DesignSpec {
    std::size_t population_size = 0;
    std::size_t sample_size = 0;
    std::vector<double> size_measures;  // required for rao_sampford, one per unit
    DesignKind kind = DesignKind::srswor;

    void validate() const {
        if (sample_size == 0) fail(errc::bad_request, "sample size must be positive");
        if (!(sample_size < population_size))
            fail(errc::bad_request, "sample size must be smaller than the population size");
        if (kind == DesignKind::rao_sampford) {
            if (size_measures.size() != population_size)
                fail(errc::bad_request, "need one size measure per population unit");
            for (double z : size_measures)
                if (!(z > 0.0) || !std::isfinite(z))
                    fail(errc::non_positive_weight, "size measures must be strictly positive");
            double total = accurate_sum(size_measures);
            for (double z : size_measures)
                if (static_cast<double>(sample_size) * z >= total)
                    fail(errc::size_measure_too_large,
                         "n*z_i/sum(z) >= 1 for some unit; reduce n or trim size measures");
        }
    }

    // First-order inclusion probabilities: n/N, or exactly n z_i / sum z.
    std::vector<double> inclusion_probs() const {
        std::vector<double> pi(population_size);
        if (kind == DesignKind::srswor) {
            double f = static_cast<double>(sample_size) / static_cast<double>(population_size);
            std::fill(pi.begin(), pi.end(), f);
        } else {
            double total = accurate_sum(size_measures);
            for (std::size_t i = 0; i < population_size; ++i)
                pi[i] = static_cast<double>(sample_size) * size_measures[i] / total;
        }
        return pi;
    }
};

struct SampleDraw {
    std::vector<std::size_t> indices;   // sorted, distinct
    std::vector<double> incl_probs;     // aligned with indices
    std::vector<double> design_weights; // 1/pi
};

namespace detail {

// Cumulative-table categorical sampler (binary search per draw).
class CategoricalSampler {
public:
    explicit CategoricalSampler(std::span<const double> weights) : cum_(weights.size()) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            cum_[i] = static_cast<double>(acc);
        }
        total_ = cum_.back();
    }
    std::size_t operator()(std::mt19937_64& rng) const {
        double u = std::uniform_real_distribution<double>(0.0, total_)(rng);
        auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        return std::min<std::size_t>(cum_.size() - 1, static_cast<std::size_t>(it - cum_.begin()));
    }

private:
    std::vector<double> cum_;
    double total_;
};

}  // namespace detail

// Rao-Sampford rejective scheme: first unit drawn proportional to z, the
// remaining n-1 with replacement proportional to z/(1 - n z/sum z); any
// duplicate restarts the attempt. Accepted samples have first-order
// inclusion probabilities exactly n z_i / sum z.
inline SampleDraw draw_sample(const DesignSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    const std::size_t big_n = spec.population_size;
    const std::size_t n = spec.sample_size;

    SampleDraw draw;
    if (spec.kind == DesignKind::srswor) {
        std::vector<std::size_t> pool(big_n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = std::uniform_int_distribution<std::size_t>(i, big_n - 1)(rng);
            std::swap(pool[i], pool[j]);
        }
        draw.indices.assign(pool.begin(), pool.begin() + n);
        std::sort(draw.indices.begin(), draw.indices.end());
        double f = static_cast<double>(n) / static_cast<double>(big_n);
        draw.incl_probs.assign(n, f);
        draw.design_weights.assign(n, 1.0 / f);
        return draw;
    }

    auto pi = spec.inclusion_probs();
    std::vector<double> rest(big_n);
    for (std::size_t i = 0; i < big_n; ++i) rest[i] = spec.size_measures[i] / (1.0 - pi[i]);
    detail::CategoricalSampler first(spec.size_measures), others(rest);

    std::vector<std::uint32_t> stamp(big_n, 0);
    std::vector<std::size_t> picked(n);
    constexpr std::uint64_t kBudget = 1'000'000;
    for (std::uint64_t attempt = 1; attempt <= kBudget; ++attempt) {
        std::uint32_t tag = static_cast<std::uint32_t>(attempt);
        std::size_t u0 = first(rng);
        stamp[u0] = tag;
        picked[0] = u0;
        bool ok = true;
        for (std::size_t j = 1; j < n; ++j) {
            std::size_t u = others(rng);
            if (stamp[u] == tag) {
                ok = false;
                break;
            }
            stamp[u] = tag;
            picked[j] = u;
        }
        if (!ok) continue;
        std::sort(picked.begin(), picked.end());
        draw.indices = picked;
        draw.incl_probs.resize(n);
        draw.design_weights.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            draw.incl_probs[j] = pi[picked[j]];
            draw.design_weights[j] = 1.0 / pi[picked[j]];
        }
        return draw;
    }
    fail(errc::rejection_budget_exceeded,
         "Rao-Sampford rejection did not accept a sample within 1e6 attempts");
}

inline SampleDraw draw_sample(const DesignSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return draw_sample(spec, rng);
}

inline std::vector<double> normalize_weights(std::span<const double> raw) {
    if (raw.empty()) fail(errc::bad_request, "no weights to normalize");
    for (double w : raw)
        if (!(w > 0.0) || !std::isfinite(w))
            fail(errc::non_positive_weight, "weights must be strictly positive");
    double total = accurate_sum(raw);
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / total;
    return out;
}

// Chi-square (GREG) calibration: w_i = d_i (1 + (X - X_HT)' T^{-1} x_i) with
// T = sum d_i x_i x_i'. Reproduces the target totals exactly; negative
// adjusted weights are possible and only flagged.
struct CalibrationResult {
    std::vector<double> weights;
    int negative_count = 0;
};

inline CalibrationResult calibrate_weights(std::span<const double> design_weights,
                                           const Matrix& aux,
                                           std::span<const double> target_total) {
    const std::size_t n = design_weights.size();
    const std::size_t k = aux.cols;
    if (aux.rows != n || target_total.size() != k)
        fail(errc::bad_request, "calibration shape mismatch");
    for (double d : design_weights)
        if (!(d > 0.0)) fail(errc::non_positive_weight, "design weights must be positive");

    Matrix t(k, k);
    std::vector<double> ht(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            ht[j] += design_weights[i] * aux(i, j);
            for (std::size_t l = j; l < k; ++l)
                t(j, l) += design_weights[i] * aux(i, j) * aux(i, l);
        }
    }
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < j; ++l) t(j, l) = t(l, j);

    std::vector<double> gap(k);
    for (std::size_t j = 0; j < k; ++j) gap[j] = target_total[j] - ht[j];
    auto adj = solve_linear(t, gap);
    if (!adj) fail(errc::singular_calibration, "aux cross-product matrix is singular");

    CalibrationResult out;
    out.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.0;
        for (std::size_t j = 0; j < k; ++j) a += (*adj)[j] * aux(i, j);
        out.weights[i] = design_weights[i] * (1.0 + a);
        if (out.weights[i] <= 0.0) ++out.negative_count;
    }
    return out;
}

// Design-weighted regression slope of the values on the auxiliaries,
// computed from Hajek-centered cross products.
inline std::vector<double> regression_coeff(const WeightedSample& ws) {
    ws.validate();
    if (!ws.has_aux()) fail(errc::bad_request, "regression_coeff needs auxiliary data");
    const std::size_t n = ws.n(), k = ws.aux_dim();

    std::vector<double> xbar(k, 0.0);
    double vbar = weighted_mean(ws.values, ws.norm_weights);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) xbar[j] += ws.norm_weights[i] * ws.aux(i, j);

    Matrix sxx(k, k);
    std::vector<double> sxv(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double dv = ws.values[i] - vbar;
        for (std::size_t j = 0; j < k; ++j) {
            double dxj = ws.aux(i, j) - xbar[j];
            sxv[j] += ws.norm_weights[i] * dxj * dv;
            for (std::size_t l = j; l < k; ++l)
                sxx(j, l) += ws.norm_weights[i] * dxj * (ws.aux(i, l) - xbar[l]);
        }
    }
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < j; ++l) sxx(j, l) = sxx(l, j);

    auto b = solve_linear(sxx, sxv);
    if (!b) fail(errc::singular_system, "weighted aux covariance is singular");
    return *b;
}

enum class DeffVariant { hajek, greg };

struct DesignEffect {
    double deff = 1.0;
    double variance_vp = 0.0;   // estimated design variance of the point estimator
    double srs_variance = 0.0;  // S^2/n analogue under simple random sampling
    double n_star = 0.0;        // effective sample size n/deff
    bool clamped = false;
};

namespace detail {

// Hajek high-entropy variance approximation for a fixed-size design applied
// to the ratio-mean estimator: n/(n-1) sum (1-pi_i) wtilde_i^2 e_i^2 with
// Hajek-centered residuals e_i. Exact (1-f) S^2/n under SRSWOR.
inline DesignEffect design_effect_impl(std::span<const double> incl_probs,
                                       std::span<const double> norm_w,
                                       std::span<const double> residuals,
                                       std::size_t n) {
    long double s2 = 0.0L, vp = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double we2 = static_cast<long double>(norm_w[i]) * residuals[i] * residuals[i];
        s2 += we2;
        vp += (1.0L - incl_probs[i]) * norm_w[i] * we2;
    }
    const double corr = static_cast<double>(n) / static_cast<double>(n - 1);
    DesignEffect de;
    de.srs_variance = corr * static_cast<double>(s2) / static_cast<double>(n);
    de.variance_vp = corr * static_cast<double>(vp);

    double rms = 0.0;
    for (std::size_t i = 0; i < n; ++i) rms = std::max(rms, std::abs(residuals[i]));
    if (!(de.srs_variance > 0.0) || de.srs_variance < 1e-28 * (1.0 + rms * rms))
        fail(errc::degenerate_variance, "residual variance is numerically zero");

    de.deff = de.variance_vp / de.srs_variance;
    de.n_star = static_cast<double>(n) / de.deff;
    double cap = 10.0 * static_cast<double>(n);
    if (de.n_star > cap || !(de.n_star > 0.0)) {
        de.n_star = cap;
        de.clamped = true;
    }
    return de;
}

inline std::vector<double> hajek_residuals(std::span<const double> v,
                                           std::span<const double> norm_w) {
    double vbar = weighted_mean(v, norm_w);
    std::vector<double> e(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) e[i] = v[i] - vbar;
    return e;
}

inline std::vector<double> greg_residuals(std::span<const double> v,
                                          std::span<const double> norm_w, const Matrix& aux,
                                          std::span<const double> aux_mean,
                                          std::span<const double> b) {
    double vbar = weighted_mean(v, norm_w);
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < aux.cols; ++j) fit += b[j] * (aux(i, j) - aux_mean[j]);
        r[i] = v[i] - vbar - fit;
    }
    // re-center: the weighted mean of GREG residuals is not exactly zero
    double rbar = weighted_mean(r, norm_w);
    for (double& ri : r) ri -= rbar;
    return r;
}

}  // namespace detail

// Design effect of the Hajek (or GREG-adjusted) point estimator and the
// resulting effective sample size n* = n/deff (clamped to (0, 10n]).
inline DesignEffect design_effect(const SampleDraw& draw, std::span<const double> v,
                                  DeffVariant variant, const Matrix* aux = nullptr,
                                  std::span<const double> aux_mean = {},
                                  std::span<const double> b = {}) {
    const std::size_t n = draw.indices.size();
    if (v.size() != n || draw.incl_probs.size() != n)
        fail(errc::bad_request, "design_effect dimension mismatch");
    if (n < 2) fail(errc::sample_too_small, "design_effect needs n >= 2");

    auto norm_w = normalize_weights(draw.design_weights);
    std::vector<double> e;
    if (variant == DeffVariant::hajek) {
        e = detail::hajek_residuals(v, norm_w);
    } else {
        if (!aux || aux_mean.empty() || b.empty())
            fail(errc::bad_request, "greg design effect needs aux, aux_mean and B");
        e = detail::greg_residuals(v, norm_w, *aux, aux_mean, b);
    }
    return detail::design_effect_impl(draw.incl_probs, norm_w, e, n);
}

// Scale factor for calibration-weighted EL: estimated S_v^2 over the design
// variance of the GREG estimator.
inline double scale_factor_w(const SampleDraw& draw, std::span<const double> v, const Matrix& aux,
                             std::span<const double> aux_mean, std::span<const double> b) {
    const std::size_t n = draw.indices.size();
    if (v.size() != n) fail(errc::bad_request, "scale_factor_w dimension mismatch");
    auto norm_w = normalize_weights(draw.design_weights);

    auto ev = detail::hajek_residuals(v, norm_w);
    auto de_v = detail::design_effect_impl(draw.incl_probs, norm_w, ev, n);

    auto er = detail::greg_residuals(v, norm_w, aux, aux_mean, b);
    auto de_r = detail::design_effect_impl(draw.incl_probs, norm_w, er, n);

    return de_v.srs_variance * static_cast<double>(n) / de_r.variance_vp;
}

}  // namespace bjel
