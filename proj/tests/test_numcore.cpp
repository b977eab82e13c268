#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hqmv/numcore.hpp"
#include "hqmv/rng.hpp"

using namespace hqmv;

TEST_CASE("silu fixed points and values") {
    Tensor x({3}, {0.0, 1.0, -1.0});
    Tensor y = silu(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(0.731058578630005).epsilon(1e-12));
    // gated output y*silu(z) dies with z = 0
    CHECK(silu(0.0) * 123.0 == 0.0);
}

TEST_CASE("silu rejects non-finite input naming the index") {
    Tensor x({3}, {1.0, std::nan(""), 2.0});
    CHECK_THROWS_WITH_AS(silu(x), doctest::Contains("index 1"), std::invalid_argument);
}

TEST_CASE("sigmoid and tanh") {
    Tensor x({2}, {0.0, 2.0});
    Tensor s = sigmoid_tanh(x, Squash::Sigmoid);
    Tensor t = sigmoid_tanh(x, Squash::Tanh);
    CHECK(s[0] == 0.5);
    CHECK(s[1] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
    CHECK(t[0] == 0.0);
}

TEST_CASE("activation shapes on a sampled grid") {
    double prev_s = -1, prev_t = -2, prev_si = -1e9;
    for (int i = -50; i <= 50; ++i) {
        const double x = double(i) * 0.2;
        CHECK(sigmoid(x) >= prev_s);
        CHECK(std::tanh(x) >= prev_t);
        // silu dips below zero but never under its global minimum, and it is
        // monotone on the nonnegative half line
        CHECK(silu(x) >= -0.2785);
        if (x >= 0.0) CHECK(silu(x) >= prev_si - 1e-15);
        prev_s = sigmoid(x);
        prev_t = std::tanh(x);
        prev_si = silu(x);
    }
}

TEST_CASE("phi1 values and continuity at zero") {
    CHECK(phi1(0.0) == 1.0);
    CHECK(phi1(1.0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
    CHECK(phi1(-0.1) == doctest::Approx(0.9516258196404048).epsilon(1e-12));
    CHECK(std::fabs(phi1(1e-9) - 1.0) < 1e-8);
    CHECK(std::fabs(phi1(-1e-9) - 1.0) < 1e-8);
}

TEST_CASE("phi1 derivative matches finite differences") {
    for (double z : {-2.0, -0.3, 1e-6, 0.4, 1.7}) {
        const double fd = (phi1(z + 1e-6) - phi1(z - 1e-6)) / 2e-6;
        CHECK(phi1_deriv(z) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("tensor reshape round-trips data") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor y = x.reshaped({6}).reshaped({3, 2}).reshaped({2, 3});
    CHECK(y.data == x.data);
    CHECK_THROWS_AS(x.reshaped({4}), std::invalid_argument);
}

TEST_CASE("seeded rng reproducibility over 1e4 draws") {
    Rng a(123456), b(123456), c(123457);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 10000; ++i) {
        const auto va = a.next_u64();
        all_equal = all_equal && va == b.next_u64();
        any_diff = any_diff || va != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng derived streams are decorrelated") {
    Rng a = Rng::derive(42, 1), b = Rng::derive(42, 2);
    CHECK(a.next_u64() != b.next_u64());
}

TEST_CASE("grad_check on w^2 at w=3") {
    double w = 3.0;
    double analytic = 6.0;
    auto reports = grad_check([&] { return w * w; },
                              {{"w", &w, &analytic, 1}}, 1e-5);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].max_rel_err < 1e-8);
    CHECK(reports[0].numeric == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("grad_check on a constant function reports zero error") {
    double w = 1.0;
    double analytic = 0.0;
    auto reports = grad_check([&] { return 5.0; }, {{"w", &w, &analytic, 1}});
    CHECK(reports[0].max_rel_err == 0.0);
}

TEST_CASE("grad_check flags non-finite loss with the probe name") {
    double w = 1.0;
    double analytic = 0.0;
    CHECK_THROWS_WITH_AS(
        grad_check([&] { return std::log(-1.0); }, {{"w", &w, &analytic, 1}}),
        doctest::Contains("w[0]"), std::runtime_error);
}

TEST_CASE("grad_check sorts by descending error") {
    double good = 2.0, bad = 2.0;
    double g_good = 4.0, g_bad = 100.0;
    auto reports = grad_check([&] { return good * good + bad * bad; },
                              {{"good", &good, &g_good, 1}, {"bad", &bad, &g_bad, 1}});
    CHECK(reports[0].param_name == "bad");
    CHECK(reports[1].param_name == "good");
}
