#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bjel/design.hpp"
#include "bjel/elcore.hpp"
#include "bjel/errors.hpp"
#include "bjel/posterior.hpp"
#include "bjel/ustat.hpp"

namespace bjel {

// Finite population y = beta0 + beta1 x + sigma eps with x ~ shift + Exp(1)
// and eps ~ N(0,1); sigma is solved so the realized corr(y,x) matches
// target_rho on the generated population.
struct PopulationSpec {
    std::size_t population_size = 1000;
    double beta0 = 1.0;
    double beta1 = 1.0;
    double x_shift = 1.0;
    double target_rho = 0.3;
    std::uint64_t seed = 1;
};

struct Population {
    std::vector<double> x;
    std::vector<double> y;
    double sigma = 0.0;
    double realized_rho = 0.0;
};

namespace detail {

struct Moments {
    double sxx, sxe, see;  // population (divisor N) second moments
};

inline double realized_corr(double beta1, double sigma, const Moments& m) {
    double cov = beta1 * m.sxx + sigma * m.sxe;
    double vy = beta1 * beta1 * m.sxx + sigma * sigma * m.see + 2.0 * beta1 * sigma * m.sxe;
    return cov / std::sqrt(m.sxx * vy);
}

}  // namespace detail

inline Population generate_population(const PopulationSpec& spec) {
    if (spec.population_size < 2) fail(errc::bad_request, "population size must be >= 2");
    if (!(spec.target_rho > 0.0 && spec.target_rho < 1.0))
        fail(errc::rho_unattainable, "target correlation must lie in (0,1)");
    if (spec.beta1 == 0.0) fail(errc::rho_unattainable, "beta1 = 0 cannot reach a positive rho");

    const std::size_t n = spec.population_size;
    Population pop;
    pop.x.resize(n);
    pop.y.resize(n);
    std::vector<double> eps(n);

    std::mt19937_64 rng(spec.seed);
    std::exponential_distribution<double> ex(1.0);
    std::normal_distribution<double> nz(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) pop.x[i] = spec.x_shift + ex(rng);
    for (std::size_t i = 0; i < n; ++i) eps[i] = nz(rng);

    auto moment = [&](std::span<const double> a, std::span<const double> b) {
        double ma = accurate_sum(a) / static_cast<double>(n);
        double mb = accurate_sum(b) / static_cast<double>(n);
        long double s = 0.0L;
        for (std::size_t i = 0; i < n; ++i)
            s += (static_cast<long double>(a[i]) - ma) * (b[i] - mb);
        return static_cast<double>(s) / static_cast<double>(n);
    };
    detail::Moments m{moment(pop.x, pop.x), moment(pop.x, eps), moment(eps, eps)};
    if (!(m.sxx > 0.0) || !(m.see > 0.0)) fail(errc::rho_unattainable, "degenerate generating draws");

    // rho(0) = 1; expand until the correlation drops below target, then bisect.
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (detail::realized_corr(spec.beta1, hi, m) > spec.target_rho) {
        hi *= 2.0;
        if (++guard > 200) fail(errc::rho_unattainable, "sigma search did not bracket the target");
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (detail::realized_corr(spec.beta1, mid, m) > spec.target_rho)
            lo = mid;
        else
            hi = mid;
    }
    pop.sigma = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i)
        pop.y[i] = spec.beta0 + spec.beta1 * pop.x[i] + pop.sigma * eps[i];
    pop.realized_rho = detail::realized_corr(spec.beta1, pop.sigma, m);
    if (std::abs(pop.realized_rho - spec.target_rho) > 0.02)
        fail(errc::rho_unattainable, "realized correlation missed the target");
    return pop;
}

// The estimand: the U-statistic evaluated over the whole finite population.
inline double population_parameter(std::span<const double> y, const Kernel& k) {
    return u_statistic(y, k);
}

struct MethodMetrics {
    Method method = Method::jel;
    double cp = 0.0;          // coverage, percent
    double lower_tail = 0.0;  // theta_true strictly below the interval, percent
    double upper_tail = 0.0;  // strictly above, percent
    double avg_length = 0.0;
    double avg_lower = 0.0;
    std::size_t used = 0;  // replicates contributing
};

struct StudyResult {
    std::vector<MethodMetrics> per_method;
    std::size_t replicates = 0;
    std::size_t failed = 0;
    double theta_true = 0.0;
    double level = 0.95;
    std::uint64_t seed = 0;
    std::string kernel;
    std::string design;
    std::size_t population_size = 0;
    std::size_t sample_size = 0;
    std::vector<std::string> failure_notes;  // first few, for diagnostics
};

namespace detail {

struct ReplicateOutcome {
    bool ok = false;
    std::string note;
    std::vector<double> lower, upper;  // aligned with the requested methods
};

inline bool needs_design_weights(std::span<const Method> ms) {
    for (Method m : ms)
        if (m == Method::jel_d || m == Method::bjel_d) return true;
    return false;
}
inline bool needs_calibration(std::span<const Method> ms) {
    for (Method m : ms)
        if (m == Method::jel_w || m == Method::bjel_w) return true;
    return false;
}

struct PopulationFacts {
    double aux_mean;   // population mean of x
    double aux_total;  // population total of x
    double n_pop;
};

inline ReplicateOutcome run_replicate(const Population& pop, const DesignSpec& design,
                                      const Kernel& kernel, std::span<const Method> methods,
                                      double level, std::uint64_t replicate_seed,
                                      const PopulationFacts& facts) {
    ReplicateOutcome out;
    out.lower.resize(methods.size());
    out.upper.resize(methods.size());
    try {
        std::mt19937_64 rng(replicate_seed);
        SampleDraw draw = draw_sample(design, rng);
        const std::size_t n = draw.indices.size();

        std::vector<double> ys(n), xs(n);
        for (std::size_t i = 0; i < n; ++i) {
            ys[i] = pop.y[draw.indices[i]];
            xs[i] = pop.x[draw.indices[i]];
        }
        PseudoValues pv = jackknife_pseudovalues(ys, kernel);

        WeightedSample ws_iid;
        ws_iid.values = pv.values;
        ws_iid.norm_weights.assign(n, 1.0 / static_cast<double>(n));

        const bool want_d = needs_design_weights(methods);
        const bool want_w = needs_calibration(methods);

        WeightedSample ws_d, ws_w;
        double scale_d = 0.0, scale_w = 0.0;
        if (want_d || want_w) {
            Matrix aux(n, 1);
            for (std::size_t i = 0; i < n; ++i) aux(i, 0) = xs[i];

            ws_d.values = pv.values;
            ws_d.norm_weights = normalize_weights(draw.design_weights);
            ws_d.aux = aux;
            ws_d.aux_mean = {facts.aux_mean};
            std::vector<double> b = regression_coeff(ws_d);

            if (want_d) {
                DesignEffect de = design_effect(draw, pv.values, DeffVariant::greg, &aux,
                                                ws_d.aux_mean, b);
                scale_d = de.n_star;
            }
            if (want_w) {
                scale_w = scale_factor_w(draw, pv.values, aux, ws_d.aux_mean, b);
                // Calibrate on the centered auxiliary: a zero total for x - Xbar
                // makes the normalized weights reproduce the population mean
                // exactly, with a much smaller adjustment than calibrating on
                // (1, x) totals.
                Matrix cal_aux(n, 1);
                for (std::size_t i = 0; i < n; ++i) cal_aux(i, 0) = xs[i] - facts.aux_mean;
                std::vector<double> totals = {0.0};
                CalibrationResult cal = calibrate_weights(draw.design_weights, cal_aux, totals);
                ws_w.values = pv.values;
                ws_w.norm_weights = normalize_weights(cal.weights);  // throws if any w <= 0
            }
        }

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            Method m = methods[mi];
            IntervalResult iv;
            switch (m) {
                case Method::jel:
                    iv = jel_interval(ws_iid, static_cast<double>(n), false, level, m);
                    break;
                case Method::bjel:
                    iv = credible_interval(build_posterior(ws_iid, static_cast<double>(n), false),
                                           level, m);
                    break;
                case Method::jel_d:
                    iv = jel_interval(ws_d, scale_d, true, level, m);
                    break;
                case Method::bjel_d:
                    iv = credible_interval(build_posterior(ws_d, scale_d, true), level, m);
                    break;
                case Method::jel_w:
                    iv = jel_interval(ws_w, scale_w, false, level, m);
                    break;
                case Method::bjel_w:
                    iv = credible_interval(build_posterior(ws_w, scale_w, false), level, m);
                    break;
            }
            out.lower[mi] = iv.lower;
            out.upper[mi] = iv.upper;
        }
        out.ok = true;
    } catch (const error& e) {
        out.note = e.what();
    }
    return out;
}

}  // namespace detail

// Replicated interval study. Replicate r derives its own generator from
// (seed, r), so results are bitwise reproducible regardless of threading,
// and failed replicates do not shift later seed streams.
inline StudyResult run_study(const Population& pop, const DesignSpec& design, const Kernel& kernel,
                             std::span<const Method> methods, std::size_t replicates, double level,
                             std::uint64_t seed, int threads = 0) {
    if (methods.empty()) fail(errc::bad_request, "no methods requested");
    if (replicates == 0) fail(errc::bad_request, "need at least one replicate");
    if (!(level > 0.0 && level < 1.0)) fail(errc::bad_request, "level must be in (0,1)");
    if (pop.y.size() != design.population_size)
        fail(errc::bad_request, "population/design size mismatch");

    detail::PopulationFacts facts;
    facts.n_pop = static_cast<double>(pop.x.size());
    facts.aux_total = accurate_sum(pop.x);
    facts.aux_mean = facts.aux_total / facts.n_pop;

    StudyResult res;
    res.replicates = replicates;
    res.level = level;
    res.seed = seed;
    res.kernel = kernel.name;
    res.design = design.kind == DesignKind::srswor ? "srswor" : "rao_sampford";
    res.population_size = design.population_size;
    res.sample_size = design.sample_size;
    res.theta_true = population_parameter(pop.y, kernel);

    std::vector<detail::ReplicateOutcome> outcomes(replicates);
    unsigned hw = std::thread::hardware_concurrency();
    unsigned tcount = threads > 0 ? static_cast<unsigned>(threads) : (hw == 0 ? 1 : hw);
    tcount = std::min<unsigned>(tcount, static_cast<unsigned>(replicates));

    auto body = [&](std::size_t r) {
        outcomes[r] = detail::run_replicate(pop, design, kernel, methods, level,
                                            mix_seed(seed, r), facts);
    };
    if (tcount <= 1) {
        for (std::size_t r = 0; r < replicates; ++r) body(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(tcount);
        for (unsigned t = 0; t < tcount; ++t)
            pool.emplace_back([&] {
                for (std::size_t r = next.fetch_add(1); r < replicates; r = next.fetch_add(1))
                    body(r);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<std::size_t> covered(methods.size(), 0), below(methods.size(), 0),
        above(methods.size(), 0);
    std::vector<double> sum_len(methods.size(), 0.0), sum_lb(methods.size(), 0.0);
    std::size_t used = 0;
    for (const auto& oc : outcomes) {
        if (!oc.ok) {
            ++res.failed;
            if (res.failure_notes.size() < 10) res.failure_notes.push_back(oc.note);
            continue;
        }
        ++used;
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            if (res.theta_true < oc.lower[mi])
                ++below[mi];
            else if (res.theta_true > oc.upper[mi])
                ++above[mi];
            else
                ++covered[mi];
            sum_len[mi] += oc.upper[mi] - oc.lower[mi];
            sum_lb[mi] += oc.lower[mi];
        }
    }

    if (static_cast<double>(res.failed) > 0.02 * static_cast<double>(replicates))
        fail(errc::simulation_quality,
             std::to_string(res.failed) + " of " + std::to_string(replicates) +
                 " replicates failed (" +
                 (res.failure_notes.empty() ? std::string("no notes") : res.failure_notes.front()) +
                 ")");

    res.per_method.resize(methods.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        MethodMetrics& mm = res.per_method[mi];
        mm.method = methods[mi];
        mm.used = used;
        if (used > 0) {
            double denom = static_cast<double>(used);
            mm.cp = 100.0 * static_cast<double>(covered[mi]) / denom;
            mm.lower_tail = 100.0 * static_cast<double>(below[mi]) / denom;
            mm.upper_tail = 100.0 * static_cast<double>(above[mi]) / denom;
            mm.avg_length = sum_len[mi] / denom;
            mm.avg_lower = sum_lb[mi] / denom;
        }
    }
    return res;
}

// Plain-text table in the usual report column order.
inline std::string format_table(const StudyResult& res) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %7s %6s %6s %9s %9s\n", "CI", "CP(%)", "L", "U", "AL",
                  "LB");
    out += line;
    for (const auto& mm : res.per_method) {
        std::snprintf(line, sizeof line, "%-8s %7.1f %6.1f %6.1f %9.3f %9.3f\n",
                      method_label(mm.method), mm.cp, mm.lower_tail, mm.upper_tail, mm.avg_length,
                      mm.avg_lower);
        out += line;
    }
    std::snprintf(line, sizeof line,
                  "theta_true=%.6g  replicates=%zu  failed=%zu  level=%.2f  seed=%llu\n",
                  res.theta_true, res.replicates, res.failed, res.level,
                  static_cast<unsigned long long>(res.seed));
    out += line;
    return out;
}

}  // namespace bjel
