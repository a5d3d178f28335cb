#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bjel/design.hpp"
#include "bjel/elcore.hpp"
#include "bjel/errors.hpp"
#include "bjel/posterior.hpp"
#include "bjel/ustat.hpp"

namespace bjel {

// One-sample analysis request: observed values, optional survey weights
// (design weights for the *_d methods, calibration weights for *_w),
// optional auxiliary columns with their known population totals.
struct AnalysisInput {
    std::vector<double> y;
    std::vector<double> weights;      // empty: equal weights
    Matrix aux;                       // empty: no auxiliary information
    std::vector<double> aux_totals;   // population totals, one per aux column
};

struct AnalysisResult {
    Method method = Method::bjel;
    std::string kernel;
    std::size_t n = 0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    double scale_used = 0.0;
    std::string diagnostics;
};

namespace detail {

// Reconstructs inclusion probabilities from survey weights. Weights on the
// inverse-probability scale give pi = 1/w; if that lands outside (0,1) the
// finite-population correction is dropped (with-replacement approximation).
inline std::pair<std::vector<double>, std::string> recover_incl_probs(
    std::span<const double> w) {
    std::vector<double> pi(w.size());
    bool valid = true;
    for (std::size_t i = 0; i < w.size(); ++i) {
        pi[i] = 1.0 / w[i];
        if (!(pi[i] > 0.0 && pi[i] < 1.0)) valid = false;
    }
    if (valid) return {pi, ""};
    std::fill(pi.begin(), pi.end(), 0.0);
    return {pi, "weights not on the 1/pi scale; fpc dropped"};
}

}  // namespace detail

inline AnalysisResult analyze(const AnalysisInput& input, const Kernel& kernel, Method method,
                              double level = 0.95) {
    const std::size_t n = input.y.size();
    if (n < static_cast<std::size_t>(kernel.order) + 1)
        fail(errc::sample_too_small, "need n >= kernel order + 1");
    if (!input.weights.empty() && input.weights.size() != n)
        fail(errc::bad_request, "weight column length mismatch");
    if (!input.aux.empty()) {
        if (input.aux.rows != n) fail(errc::bad_request, "aux column length mismatch");
        if (input.aux_totals.size() != input.aux.cols)
            fail(errc::bad_request, "need one population total per aux column");
    } else if (!input.aux_totals.empty()) {
        fail(errc::bad_request, "aux totals given without aux columns");
    }

    AnalysisResult res;
    res.method = method;
    res.kernel = kernel.name;
    res.n = n;
    res.level = level;

    PseudoValues pv = jackknife_pseudovalues(input.y, kernel);

    std::vector<double> w = input.weights;
    if (w.empty()) w.assign(n, 1.0);
    for (double wi : w)
        if (!(wi > 0.0) || !std::isfinite(wi))
            fail(errc::non_positive_weight, "weights must be strictly positive");

    const bool has_aux = !input.aux.empty();
    std::vector<double> aux_mean(input.aux.cols);
    if (has_aux) {
        // Totals are converted to means with N estimated by the weight sum.
        double n_hat = accurate_sum(w);
        for (std::size_t j = 0; j < input.aux.cols; ++j)
            aux_mean[j] = input.aux_totals[j] / n_hat;
    }

    SampleDraw draw;
    draw.indices.resize(n);
    std::iota(draw.indices.begin(), draw.indices.end(), std::size_t{0});
    draw.design_weights = w;
    auto [pi, pi_note] = detail::recover_incl_probs(w);
    draw.incl_probs = std::move(pi);
    res.diagnostics = pi_note;

    WeightedSample ws;
    ws.values = pv.values;
    double scale = 0.0;
    bool use_aux = false;

    switch (method) {
        case Method::jel:
        case Method::bjel:
            ws.norm_weights.assign(n, 1.0 / static_cast<double>(n));
            scale = static_cast<double>(n);
            break;
        case Method::jel_d:
        case Method::bjel_d: {
            ws.norm_weights = normalize_weights(w);
            if (has_aux) {
                ws.aux = input.aux;
                ws.aux_mean = aux_mean;
                std::vector<double> b = regression_coeff(ws);
                DesignEffect de =
                    design_effect(draw, pv.values, DeffVariant::greg, &input.aux, aux_mean, b);
                scale = de.n_star;
                use_aux = true;
            } else {
                DesignEffect de = design_effect(draw, pv.values, DeffVariant::hajek);
                scale = de.n_star;
            }
            break;
        }
        case Method::jel_w:
        case Method::bjel_w: {
            ws.norm_weights = normalize_weights(w);
            if (has_aux) {
                WeightedSample ws_design = ws;
                ws_design.aux = input.aux;
                ws_design.aux_mean = aux_mean;
                std::vector<double> b = regression_coeff(ws_design);
                scale = scale_factor_w(draw, pv.values, input.aux, aux_mean, b);
            } else {
                DesignEffect de = design_effect(draw, pv.values, DeffVariant::hajek);
                scale = de.n_star;  // S_v^2 over the Hajek variance when no aux is given
            }
            break;
        }
    }

    res.scale_used = scale;
    res.estimate = el_maximizer(ws, use_aux).theta_hat;
    IntervalResult iv = is_bayesian(method)
                            ? credible_interval(build_posterior(ws, scale, use_aux), level, method)
                            : jel_interval(ws, scale, use_aux, level, method);
    res.lower = iv.lower;
    res.upper = iv.upper;
    if (!iv.diagnostics.empty())
        res.diagnostics += (res.diagnostics.empty() ? "" : "; ") + iv.diagnostics;
    return res;
}

}  // namespace bjel
