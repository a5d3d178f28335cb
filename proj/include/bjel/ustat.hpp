#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bjel/errors.hpp"
#include "bjel/math.hpp"

namespace bjel {

// A U-statistic kernel: a symmetric real function of `order` arguments.
// Symmetry is the caller's contract; builtin kernels satisfy it.
struct Kernel {
    int order = 1;
    std::function<double(std::span<const double>)> eval;
    std::string name;
};

inline Kernel mean_kernel() {
    return {1, [](std::span<const double> a) { return a[0]; }, "mean"};
}

// h(x,y) = (x-y)^2 / 2, the unbiased-variance kernel.
inline Kernel variance_kernel() {
    return {2,
            [](std::span<const double> a) {
                double d = a[0] - a[1];
                return 0.5 * d * d;
            },
            "variance"};
}

// h(x,y) = max(x,y)/2, the probability-weighted-moment kernel E{Y F(Y)}.
inline Kernel pwm_kernel() {
    return {2, [](std::span<const double> a) { return 0.5 * std::max(a[0], a[1]); }, "pwm"};
}

inline std::vector<Kernel> builtin_kernels() {
    return {mean_kernel(), variance_kernel(), pwm_kernel()};
}

inline Kernel find_kernel(std::string_view name) {
    for (auto& k : builtin_kernels())
        if (k.name == name) return k;
    fail(errc::bad_request, "unknown kernel '" + std::string(name) + "' (expected mean|variance|pwm)");
}

// Jackknife pseudo-values v_i = n T_n - (n-1) T_{n-1}^{(-i)} and the
// generating U-statistic. mean(values) == u_stat by construction.
struct PseudoValues {
    std::vector<double> values;
    double u_stat = 0.0;
    std::size_t n() const { return values.size(); }
};

namespace detail {

inline void check_sample(std::span<const double> y, const Kernel& k, std::size_t min_n) {
    if (k.order < 1) fail(errc::bad_request, "kernel order must be >= 1");
    if (y.size() < min_n)
        fail(errc::sample_too_small, "need n >= " + std::to_string(min_n) + ", got " +
                                         std::to_string(y.size()));
    if (!all_finite(y)) fail(errc::invalid_input, "sample contains non-finite values");
}

inline double checked_eval(const Kernel& k, std::span<const double> args) {
    double h = k.eval(args);
    if (!std::isfinite(h)) fail(errc::invalid_input, "kernel produced a non-finite value");
    return h;
}

// Enumerates all m-subsets once, accumulating the total kernel sum and each
// unit's share. subset_sum excluding unit i is total - share[i].
struct SubsetSums {
    double total = 0.0;
    std::vector<double> share;
};

inline SubsetSums enumerate_subsets(std::span<const double> y, const Kernel& k) {
    const std::size_t n = y.size();
    const std::size_t m = static_cast<std::size_t>(k.order);
    SubsetSums out;
    out.share.assign(n, 0.0);

    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> args(m);
    long double total = 0.0L;
    while (true) {
        for (std::size_t j = 0; j < m; ++j) args[j] = y[idx[j]];
        double h = checked_eval(k, args);
        total += h;
        for (std::size_t j = 0; j < m; ++j) out.share[idx[j]] += h;

        // next combination in lexicographic order
        std::size_t j = m;
        while (j-- > 0) {
            if (idx[j] != j + n - m) {
                ++idx[j];
                for (std::size_t l = j + 1; l < m; ++l) idx[l] = idx[l - 1] + 1;
                break;
            }
            if (j == 0) return (out.total = static_cast<double>(total), out);
        }
    }
}

inline double binomial(std::size_t n, std::size_t m) {
    double c = 1.0;
    for (std::size_t i = 0; i < m; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return c;
}

}  // namespace detail

// T_n = C(n,m)^{-1} sum over all m-subsets of h. O(n^2) for m = 2,
// full enumeration O(C(n,m) m) otherwise.
inline double u_statistic(std::span<const double> y, const Kernel& k) {
    detail::check_sample(y, k, static_cast<std::size_t>(k.order));
    const std::size_t n = y.size();

    if (k.order == 1) {
        long double s = 0.0L;
        double args[1];
        for (std::size_t i = 0; i < n; ++i) {
            args[0] = y[i];
            s += detail::checked_eval(k, args);
        }
        return static_cast<double>(s / n);
    }
    if (k.order == 2) {
        long double s = 0.0L;
        double args[2];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                args[0] = y[i];
                args[1] = y[j];
                s += detail::checked_eval(k, args);
            }
        return static_cast<double>(s / detail::binomial(n, 2));
    }
    auto sums = detail::enumerate_subsets(y, k);
    return sums.total / detail::binomial(n, static_cast<std::size_t>(k.order));
}

// Pseudo-values via shared kernel sums: every leave-one-out statistic reuses
// the full enumeration, so m = 2 costs O(n^2) total rather than O(n^3).
inline PseudoValues jackknife_pseudovalues(std::span<const double> y, const Kernel& k) {
    detail::check_sample(y, k, static_cast<std::size_t>(k.order) + 1);
    const std::size_t n = y.size();
    const std::size_t m = static_cast<std::size_t>(k.order);

    PseudoValues pv;
    pv.values.resize(n);

    if (m == 1) {
        // nT_n - (n-1)T^{(-i)} collapses to h(y_i) exactly.
        long double s = 0.0L;
        double args[1];
        for (std::size_t i = 0; i < n; ++i) {
            args[0] = y[i];
            pv.values[i] = detail::checked_eval(k, args);
            s += pv.values[i];
        }
        pv.u_stat = static_cast<double>(s / n);
        return pv;
    }

    double total;
    std::vector<double> share(n, 0.0);
    if (m == 2) {
        long double tot = 0.0L;
        double args[2];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                args[0] = y[i];
                args[1] = y[j];
                double h = detail::checked_eval(k, args);
                tot += h;
                share[i] += h;
                share[j] += h;
            }
        }
        total = static_cast<double>(tot);
    } else {
        auto sums = detail::enumerate_subsets(y, k);
        total = sums.total;
        share = std::move(sums.share);
    }

    const double c_n = detail::binomial(n, m);
    const double c_n1 = detail::binomial(n - 1, m);
    pv.u_stat = total / c_n;
    for (std::size_t i = 0; i < n; ++i) {
        double t_minus_i = (total - share[i]) / c_n1;
        pv.values[i] = static_cast<double>(n) * pv.u_stat - static_cast<double>(n - 1) * t_minus_i;
    }
    return pv;
}

}  // namespace bjel
