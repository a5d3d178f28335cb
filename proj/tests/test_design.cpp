#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>

#include "bjel/design.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace bjel;

namespace {

DesignSpec pps_spec(std::size_t big_n, std::size_t n, std::vector<double> z) {
    DesignSpec s;
    s.population_size = big_n;
    s.sample_size = n;
    s.kind = DesignKind::rao_sampford;
    s.size_measures = std::move(z);
    return s;
}

// empirical inclusion frequencies over many draws
std::vector<double> inclusion_frequencies(const DesignSpec& spec, std::size_t reps,
                                          std::uint64_t seed) {
    std::vector<std::size_t> hits(spec.population_size, 0);
    std::mt19937_64 rng(seed);
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t idx : draw_sample(spec, rng).indices) ++hits[idx];
    std::vector<double> freq(spec.population_size);
    for (std::size_t i = 0; i < spec.population_size; ++i)
        freq[i] = static_cast<double>(hits[i]) / static_cast<double>(reps);
    return freq;
}

}  // namespace

TEST_CASE("draws are deterministic given the seed", "[design]") {
    std::mt19937_64 zr(5);
    auto spec = pps_spec(20, 6, random_uniform(20, zr, 0.5, 2.0));
    SampleDraw a = draw_sample(spec, 424242);
    SampleDraw b = draw_sample(spec, 424242);
    CHECK(a.indices == b.indices);
    CHECK(a.incl_probs == b.incl_probs);

    DesignSpec srs;
    srs.population_size = 50;
    srs.sample_size = 10;
    CHECK(draw_sample(srs, 7).indices == draw_sample(srs, 7).indices);
}

TEST_CASE("Rao-Sampford inclusion frequencies match n z / sum z", "[design]") {
    const std::size_t reps = 100000;

    SECTION("equal sizes reduce to SRS") {
        auto spec = pps_spec(4, 2, {1.0, 1.0, 1.0, 1.0});
        auto freq = inclusion_frequencies(spec, reps, 1001);
        double se = std::sqrt(0.5 * 0.5 / static_cast<double>(reps));
        for (double f : freq) CHECK(std::abs(f - 0.5) <= 3.0 * se);
    }

    SECTION("unequal sizes") {
        auto spec = pps_spec(5, 2, {1.0, 1.0, 1.0, 1.0, 2.0});
        auto pi = spec.inclusion_probs();
        CHECK(pi[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK(pi[4] == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
        auto freq = inclusion_frequencies(spec, reps, 1002);
        for (std::size_t i = 0; i < 5; ++i) {
            double se = std::sqrt(pi[i] * (1.0 - pi[i]) / static_cast<double>(reps));
            CHECK(std::abs(freq[i] - pi[i]) <= 3.0 * se);
        }
    }
}

TEST_CASE("Rao-Sampford reproduces the exact sample distribution", "[design]") {
    // For N=5, n=2, z=[1,1,1,1,2] the accepted-sample distribution has a
    // closed form: each of the six small-small pairs carries probability
    // 1/18 and each pair containing the large unit carries 1/6. (The same
    // numbers follow from the rejective scheme's per-attempt acceptance
    // probabilities q1_a qr_b + q1_b qr_a, renormalized.)
    auto spec = pps_spec(5, 2, {1.0, 1.0, 1.0, 1.0, 2.0});
    const std::size_t reps = 100000;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    std::mt19937_64 rng(360360);
    for (std::size_t r = 0; r < reps; ++r) {
        SampleDraw d = draw_sample(spec, rng);
        ++counts[{d.indices[0], d.indices[1]}];
    }
    REQUIRE(counts.size() == 10);
    for (const auto& [pair, count] : counts) {
        double expected = pair.second == 4 ? 1.0 / 6.0 : 1.0 / 18.0;
        double freq = static_cast<double>(count) / static_cast<double>(reps);
        double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(reps));
        CHECK(std::abs(freq - expected) <= 3.0 * se);
    }
}

TEST_CASE("SRSWOR inclusion frequencies are n/N", "[design]") {
    DesignSpec spec;
    spec.population_size = 10;
    spec.sample_size = 3;
    auto freq = inclusion_frequencies(spec, 100000, 1003);
    double se = std::sqrt(0.3 * 0.7 / 1e5);
    for (double f : freq) CHECK(std::abs(f - 0.3) <= 3.0 * se);
}

TEST_CASE("design validation", "[design]") {
    CHECK(error_code_of([] {
        DesignSpec s;
        s.population_size = 5;
        s.sample_size = 5;
        s.validate();
    }) == errc::bad_request);

    CHECK(error_code_of([] {
        auto s = pps_spec(3, 2, {1.0, 1.0, 5.0});  // 2*5/7 > 1
        s.validate();
    }) == errc::size_measure_too_large);

    CHECK(error_code_of([] {
        auto s = pps_spec(3, 2, {1.0, -1.0, 1.0});
        s.validate();
    }) == errc::non_positive_weight);
}

TEST_CASE("hopeless rejection rates exhaust the restart budget", "[design]") {
    // n/N = 1/2 makes the with-replacement phase collide almost surely
    auto spec = pps_spec(200, 100, std::vector<double>(200, 1.0));
    std::mt19937_64 rng(1);
    CHECK(error_code_of([&] { draw_sample(spec, rng); }) == errc::rejection_budget_exceeded);
}

TEST_CASE("weight normalization", "[design]") {
    auto a = normalize_weights(std::vector<double>{2.0, 2.0});
    CHECK(a[0] == 0.5);
    CHECK(a[1] == 0.5);
    auto b = normalize_weights(std::vector<double>{1.0, 3.0});
    CHECK(b[0] == 0.25);
    CHECK(b[1] == 0.75);

    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 20; ++rep) {
        auto w = normalize_weights(random_uniform(200, rng, 0.01, 5.0));
        CHECK(std::abs(accurate_sum(w) - 1.0) <= 1e-15);
    }
    CHECK(error_code_of([] { normalize_weights(std::vector<double>{1.0, 0.0}); }) ==
          errc::non_positive_weight);
}

TEST_CASE("chi-square calibration hits the target totals", "[design]") {
    SECTION("hand-worked two-unit case") {
        Matrix x(2, 1);
        x(0, 0) = 1.0;
        x(1, 0) = 2.0;
        auto cal = calibrate_weights(std::vector<double>{2.0, 2.0}, x, std::vector<double>{7.0});
        CHECK(cal.weights[0] == Catch::Approx(2.2).epsilon(1e-13));
        CHECK(cal.weights[1] == Catch::Approx(2.4).epsilon(1e-13));
        CHECK(cal.weights[0] * 1.0 + cal.weights[1] * 2.0 == Catch::Approx(7.0).epsilon(1e-13));
    }

    SECTION("already-calibrated weights are returned unchanged") {
        Matrix x(3, 1);
        x(0, 0) = 1.0;
        x(1, 0) = 4.0;
        x(2, 0) = 2.5;
        std::vector<double> d{3.0, 1.5, 2.0};
        double total = 3.0 * 1.0 + 1.5 * 4.0 + 2.0 * 2.5;
        auto cal = calibrate_weights(d, x, std::vector<double>{total});
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(cal.weights[i] == Catch::Approx(d[i]).epsilon(1e-13));
    }

    SECTION("collinear columns are singular") {
        Matrix x(3, 2);
        for (std::size_t i = 0; i < 3; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i + 1);
        CHECK(error_code_of([&] {
            calibrate_weights(std::vector<double>{1.0, 1.0, 1.0}, x,
                              std::vector<double>{7.0, 7.0});
        }) == errc::singular_calibration);
    }

    SECTION("exactness on random instances") {
        std::mt19937_64 rng(909);
        for (int rep = 0; rep < 30; ++rep) {
            std::size_t n = 20;
            Matrix x(n, 2);
            for (std::size_t i = 0; i < n; ++i) {
                x(i, 0) = 1.0;
                x(i, 1) = random_uniform(1, rng, 0.2, 4.0)[0];
            }
            auto d = random_uniform(n, rng, 1.0, 10.0);
            std::vector<double> target{static_cast<double>(n) * 6.0, 0.0};
            for (std::size_t i = 0; i < n; ++i) target[1] += 6.0 * x(i, 1);
            auto cal = calibrate_weights(d, x, target);
            double t0 = 0.0, t1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                t0 += cal.weights[i] * x(i, 0);
                t1 += cal.weights[i] * x(i, 1);
            }
            CHECK(std::abs(t0 - target[0]) <= 1e-8 * std::abs(target[0]));
            CHECK(std::abs(t1 - target[1]) <= 1e-8 * std::abs(target[1]));
        }
    }
}

TEST_CASE("regression coefficient", "[design]") {
    SECTION("exact linear relation") {
        WeightedSample ws;
        ws.values = {5.0, 7.0, 9.0, 11.0};
        ws.norm_weights.assign(4, 0.25);
        ws.aux = Matrix(4, 1);
        for (std::size_t i = 0; i < 4; ++i) ws.aux(i, 0) = static_cast<double>(i);
        ws.aux_mean = {1.5};
        auto b = regression_coeff(ws);
        CHECK(b[0] == Catch::Approx(2.0).epsilon(1e-12));
    }

    SECTION("constant response gives zero slope") {
        WeightedSample ws;
        ws.values.assign(5, 4.0);
        ws.norm_weights.assign(5, 0.2);
        ws.aux = Matrix(5, 1);
        for (std::size_t i = 0; i < 5; ++i) ws.aux(i, 0) = static_cast<double>(i);
        ws.aux_mean = {2.0};
        CHECK(regression_coeff(ws)[0] == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("random instance matches the normal-equations oracle") {
        std::mt19937_64 rng(5511);
        for (int rep = 0; rep < 20; ++rep) {
            std::size_t n = 5, k = 2;
            WeightedSample ws;
            ws.values = random_normal(n, rng, 1.0, 2.0);
            ws.norm_weights = normalize_weights(random_uniform(n, rng, 0.5, 2.0));
            ws.aux = Matrix(n, k);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) ws.aux(i, j) = random_normal(1, rng)[0];
            ws.aux_mean = {0.0, 0.0};
            auto b = regression_coeff(ws);
            auto oracle = oracles::wls_slopes(ws.aux, ws.values, ws.norm_weights);
            for (std::size_t j = 0; j < k; ++j) CHECK(std::abs(b[j] - oracle[j]) <= 1e-10);
        }
    }
}

TEST_CASE("SRSWOR design effect is 1 - f", "[design]") {
    DesignSpec spec;
    spec.population_size = 1000;
    spec.sample_size = 100;
    std::mt19937_64 rng(81);
    double mean_deff = 0.0;
    const int reps = 300;
    for (int r = 0; r < reps; ++r) {
        SampleDraw draw = draw_sample(spec, rng);
        auto v = random_normal(100, rng, 2.0, 3.0);
        DesignEffect de = design_effect(draw, v, DeffVariant::hajek);
        CHECK(std::abs(de.deff - 0.9) <= 1e-12);  // exact under equal weights
        CHECK(de.n_star == Catch::Approx(100.0 / de.deff));
        mean_deff += de.deff;
    }
    CHECK(std::abs(mean_deff / reps - 0.9) <= 0.05);
}

TEST_CASE("equal-size Rao-Sampford matches SRSWOR design effects", "[design]") {
    auto spec = pps_spec(200, 30, std::vector<double>(200, 1.0));
    DesignSpec srs;
    srs.population_size = 200;
    srs.sample_size = 30;

    std::mt19937_64 rng(82);
    double d1 = 0.0, d2 = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        auto v = random_normal(30, rng, 0.0, 1.0);
        d1 += design_effect(draw_sample(spec, rng), v, DeffVariant::hajek).deff;
        d2 += design_effect(draw_sample(srs, rng), v, DeffVariant::hajek).deff;
    }
    CHECK(std::abs(d1 / reps - d2 / reps) <= 0.05);
}

TEST_CASE("pps design with values proportional to size beats SRS", "[design]") {
    // Values proportional to size, with the residual mass carried by
    // high-inclusion units: the pps Hajek estimator is far more stable than
    // SRS, and both the estimated and the Monte Carlo design effect show it.
    const std::size_t big_n = 1000, n = 60;
    std::vector<double> z(big_n, 1.0);
    for (std::size_t i = 0; i < 50; ++i) z[i] = 6.0;
    auto spec = pps_spec(big_n, n, z);

    std::vector<double> v_pop(big_n);
    for (std::size_t i = 0; i < big_n; ++i) v_pop[i] = 2.5 * z[i];

    std::mt19937_64 rng(83);
    const int reps = 10000;
    std::vector<double> hajek(reps);
    double deff_sum = 0.0;
    for (int r = 0; r < reps; ++r) {
        SampleDraw draw = draw_sample(spec, rng);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = v_pop[draw.indices[i]];
        auto nw = normalize_weights(draw.design_weights);
        hajek[static_cast<std::size_t>(r)] = weighted_mean(v, nw);
        if (r < 200) deff_sum += design_effect(draw, v, DeffVariant::hajek).deff;
    }
    CHECK(deff_sum / 200.0 < 0.5);

    // Monte Carlo truth: Var(hajek) over draws against S_v^2/n
    double hm = accurate_sum(hajek) / reps;
    double mc_var = 0.0;
    for (double h : hajek) mc_var += (h - hm) * (h - hm);
    mc_var /= reps - 1;
    double vm = accurate_sum(v_pop) / static_cast<double>(big_n);
    double s2 = 0.0;
    for (double vv : v_pop) s2 += (vv - vm) * (vv - vm);
    s2 /= static_cast<double>(big_n - 1);
    CHECK(mc_var / (s2 / static_cast<double>(n)) < 0.5);
}

TEST_CASE("effective sample size is clamped at ten times n", "[design]") {
    // near-unit inclusion probabilities kill the estimated design variance
    const std::size_t n = 40;
    SampleDraw draw;
    draw.indices.resize(n);
    std::iota(draw.indices.begin(), draw.indices.end(), std::size_t{0});
    draw.incl_probs.assign(n, 0.9999);
    draw.design_weights.assign(n, 1.0 / 0.9999);
    std::mt19937_64 rng(12);
    auto v = random_normal(n, rng, 0.0, 1.0);
    DesignEffect de = design_effect(draw, v, DeffVariant::hajek);
    CHECK(de.clamped);
    CHECK(de.n_star == Catch::Approx(10.0 * n));
}

TEST_CASE("calibration-weight scale factor", "[design]") {
    DesignSpec spec;
    spec.population_size = 1000;
    spec.sample_size = 100;
    std::mt19937_64 rng(84);

    SECTION("no real aux effect: m is about n/(1-f)") {
        double mean_m = 0.0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            SampleDraw draw = draw_sample(spec, rng);
            auto v = random_normal(100, rng, 0.0, 2.0);
            Matrix aux(100, 1);
            auto x = random_normal(100, rng, 5.0, 1.0);  // independent of v
            for (std::size_t i = 0; i < 100; ++i) aux(i, 0) = x[i];
            WeightedSample ws;
            ws.values = v;
            ws.norm_weights = normalize_weights(draw.design_weights);
            ws.aux = aux;
            ws.aux_mean = {5.0};
            auto b = regression_coeff(ws);
            mean_m += scale_factor_w(draw, v, aux, ws.aux_mean, b);
        }
        mean_m /= reps;
        double expected = 100.0 / (1.0 - 0.1);
        CHECK(std::abs(mean_m - expected) <= 0.2 * expected);
    }

    SECTION("constant values are degenerate") {
        SampleDraw draw = draw_sample(spec, rng);
        std::vector<double> v(100, 1.0);
        Matrix aux(100, 1);
        for (std::size_t i = 0; i < 100; ++i) aux(i, 0) = static_cast<double>(i);
        CHECK(error_code_of([&] {
            scale_factor_w(draw, v, aux, std::vector<double>{49.5}, std::vector<double>{0.0});
        }) == errc::degenerate_variance);
    }

    SECTION("strong aux pushes m above n") {
        SampleDraw draw = draw_sample(spec, rng);
        Matrix aux(100, 1);
        std::vector<double> v(100);
        auto x = random_normal(100, rng, 0.0, 1.0);
        auto noise = random_normal(100, rng, 0.0, 0.05);
        for (std::size_t i = 0; i < 100; ++i) {
            aux(i, 0) = x[i];
            v[i] = 5.0 * x[i] + noise[i];
        }
        WeightedSample ws;
        ws.values = v;
        ws.norm_weights = normalize_weights(draw.design_weights);
        ws.aux = aux;
        ws.aux_mean = {0.0};
        auto b = regression_coeff(ws);
        CHECK(scale_factor_w(draw, v, aux, ws.aux_mean, b) > 100.0);
    }
}

TEST_CASE("scaling design weights changes nothing downstream", "[design]") {
    DesignSpec spec;
    spec.population_size = 500;
    spec.sample_size = 60;
    std::mt19937_64 rng(85);
    SampleDraw draw = draw_sample(spec, rng);
    auto v = random_normal(60, rng, 1.0, 2.0);
    Matrix aux(60, 1);
    auto x = random_normal(60, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < 60; ++i) aux(i, 0) = x[i];

    SampleDraw scaled = draw;
    for (double& d : scaled.design_weights) d *= 7.25;

    auto w1 = normalize_weights(draw.design_weights);
    auto w2 = normalize_weights(scaled.design_weights);
    for (std::size_t i = 0; i < 60; ++i) CHECK(std::abs(w1[i] - w2[i]) <= 1e-12);

    WeightedSample ws1{v, w1, aux, {0.0}}, ws2{v, w2, aux, {0.0}};
    auto b1 = regression_coeff(ws1);
    auto b2 = regression_coeff(ws2);
    CHECK(std::abs(b1[0] - b2[0]) <= 1e-12 * std::max(1.0, std::abs(b1[0])));

    auto d1 = design_effect(draw, v, DeffVariant::hajek);
    auto d2 = design_effect(scaled, v, DeffVariant::hajek);
    CHECK(std::abs(d1.deff - d2.deff) <= 1e-12);
    CHECK(std::abs(d1.n_star - d2.n_star) <= 1e-12 * d1.n_star);
}
