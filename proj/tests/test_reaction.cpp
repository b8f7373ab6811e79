#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pamlab/reaction.hpp"

using namespace pamlab;

TEST_CASE("linear preset constants") {
    ReactionSpec s = make_linear(0.0, 1.0);
    CHECK(s.f(0.0) == 0.0);
    CHECK(s.g(0.0) == 0.0);
    CHECK(s.mu == 0.0);
    CHECK(s.sigma == 1.0);
    CHECK(s.L_g == 1.0);
    CHECK(s.g(2.5) == 2.5);
}

TEST_CASE("fisher_kpp preset: mu = a, ratios exact, clamped tails") {
    ReactionSpec s = make_fisher_kpp(0.001, 1.0, 4.0);
    CHECK(s.mu == 0.001);
    CHECK(s.sigma == 4.0);
    CHECK(s.L_g == 4.0);
    CHECK(s.sup_f_ratio == 0.001);
    CHECK(s.f(0.5) == doctest::Approx(0.001 * 0.5 - 0.25));
    // Tangent continuation beyond the cap keeps a global Lipschitz bound.
    const double cap = 10.0;
    const double slope_at_cap = 0.001 - 2.0 * cap;
    CHECK(s.f(cap + 1.0) == doctest::Approx((0.001 * cap - cap * cap) + slope_at_cap));
    // Finite difference never exceeds the reported Lipschitz constant.
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unif(-12.0, 12.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = unif(rng), y = unif(rng);
        if (x == y) continue;
        CHECK(std::fabs(s.f(x) - s.f(y)) <= (s.lip_f + 1e-9) * std::fabs(x - y));
        CHECK(std::fabs(s.g(x) - s.g(y)) <= (s.lip_g + 1e-9) * std::fabs(x - y));
    }
}

TEST_CASE("allen_cahn preset: mu = a") {
    ReactionSpec s = make_allen_cahn(0.001, 1.0);
    CHECK(s.mu == 0.001);
    CHECK(s.f(0.1) == doctest::Approx(0.001 * 0.1 - 0.001));
    CHECK_THROWS_AS(make_allen_cahn(0.0, -1.0), std::domain_error);
}

TEST_CASE("preset factory dispatch") {
    CHECK(make_preset("linear", 0.5, 2.0, 0.0).sigma == 2.0);
    CHECK(make_preset("fisher_kpp", 0.001, 1.0, 4.0).L_g == 4.0);
    CHECK_THROWS_AS(make_preset("unknown", 0, 0, 0), std::domain_error);
}

TEST_CASE("linearization error vanishes for linear pairs") {
    ReactionSpec s = make_linear(0.7, 2.0);
    for (double a : {1e-6, 1e-3, 0.1, 1.0})
        CHECK(linearization_error(s, a) == 0.0);
}

TEST_CASE("linearization error of z - z^2 equals the window size") {
    // Oracle: sup_{z <= a} |(z - z^2)/z - 1| = sup_{z <= a} z = a, and the
    // linear g contributes nothing.
    ReactionSpec s = make_fisher_kpp(1.0, 1.0, 4.0);
    CHECK(linearization_error(s, 0.1) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(linearization_error(s, 0.01) == doctest::Approx(0.01).epsilon(1e-6));
    CHECK_THROWS_AS(linearization_error(s, 0.0), std::domain_error);
    CHECK_THROWS_AS(linearization_error(s, -0.5), std::domain_error);
}

TEST_CASE("linearization error is nondecreasing in the window size") {
    ReactionSpec s = make_allen_cahn(0.3, 2.0, 1.0);
    double prev = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double a = std::pow(10.0, -6.0 + 6.0 * i / 19.0);
        const double e = linearization_error(s, a);
        CHECK(e >= prev - 1e-12);
        prev = e;
    }
}

TEST_CASE("dissipation rate arithmetic") {
    // gamma = L_g^2 / 64 - sup f/z.
    CHECK(dissipation_rate(make_linear(0.0, 1.0)) == 0.015625); // 1/64 exactly
    CHECK(dissipation_rate(make_linear(0.0, 4.0)) == 0.25);
    CHECK(dissipation_rate(make_linear(1.0 / 64.0, 1.0)) == 0.0);
    for (double sg : {1.0, 2.0, 4.0})
        CHECK(dissipation_rate(make_linear(0.0, sg)) == sg * sg / 64.0);
}

TEST_CASE("high-noise condition report") {
    HighNoiseReport r = check_high_noise(make_linear(0.0, 1.0));
    CHECK(r.holds);
    CHECK(r.margin == doctest::Approx(1.0 / 64.0));

    r = check_high_noise(make_linear(1.0, 1.0));
    CHECK_FALSE(r.holds);
    CHECK(r.sup_f_ratio == 1.0);
    CHECK(r.threshold == doctest::Approx(1.0 / 64.0));

    r = check_high_noise(make_fisher_kpp(0.001, 1.0, 1.0));
    CHECK(r.holds); // sup f/z = 0.001 < 1/64
}

TEST_CASE("custom spec derives constants by sampling") {
    ReactionSpec s = make_custom([](double z) { return 0.5 * z - 0.1 * z * z; },
                                 [](double z) { return 2.0 * z; });
    CHECK(s.mu == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(s.sigma == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(s.L_g == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(s.sup_f_ratio == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(s.lip_g == doctest::Approx(2.0).epsilon(1e-6));
    CHECK_THROWS_AS(make_custom([](double z) { return z + 1.0; }, [](double z) { return z; }),
                    std::domain_error);
}

TEST_CASE("bounded-by-lipschitz property on a dense sample") {
    // Any spec with f(0) = g(0) = 0 satisfies |f(z)| <= lip_f |z|.
    for (const ReactionSpec& s : {make_fisher_kpp(0.3, 0.7, 2.0), make_allen_cahn(0.2, 0.4, 1.5)}) {
        for (int i = -1000; i <= 1000; ++i) {
            const double z = i * 0.01;
            CHECK(std::fabs(s.f(z)) <= (s.lip_f + 1e-9) * std::fabs(z));
            CHECK(std::fabs(s.g(z)) <= (s.lip_g + 1e-9) * std::fabs(z));
        }
    }
}
