#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "hqmv/numcore.hpp"
#include "hqmv/rng.hpp"
#include "hqmv/ssm.hpp"

using namespace hqmv;
using namespace hqmv::ssm;

namespace {

// Straight-line transcription of the recurrence, written independently of the
// library kernels: explicit h[d][n] state, expm1-based discretization.
Tensor naive_scan(const Tensor& x, const Tensor& delta, const Tensor& A,
                  const Tensor& B, const Tensor& C) {
    const std::size_t L = x.shape[0], D = x.shape[1], N = A.shape[1];
    Tensor y = Tensor::zeros({L, D});
    std::vector<std::vector<double>> h(D, std::vector<double>(N, 0.0));
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t n = 0; n < N; ++n) {
                const double z = delta.at(t, d) * A.at(d, n);
                const double a_d = std::exp(z);
                const double p1 = (z == 0.0) ? 1.0 : std::expm1(z) / z;
                const double b_d = p1 * delta.at(t, d) * B.at(t, n);
                h[d][n] = a_d * h[d][n] + b_d * x.at(t, d);
            }
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) acc += C.at(t, n) * h[d][n];
            y.at(t, d) = acc;
        }
    }
    return y;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

MambaBlockParams random_block(std::size_t D, std::size_t N, std::uint64_t seed) {
    MambaBlockParams p = MambaBlockParams::zeros(D, N);
    Rng rng(seed);
    auto fill = [&](std::vector<double>& v, double s) {
        for (auto& x : v) x = rng.uniform(-s, s);
    };
    fill(p.W_in.W, 0.5);
    fill(p.conv_k, 0.5);
    fill(p.W_proj.W, 0.5);
    for (auto& a : p.A_log) a = rng.uniform(-1.0, 0.5);
    for (auto& b : p.delta_bias) b = rng.uniform(-0.5, 0.5);
    fill(p.W_out.W, 0.5);
    return p;
}

}  // namespace

TEST_CASE("discretize closed forms") {
    auto [a1, b1] = discretize(0.5, 0.0, 2.0);
    CHECK(a1 == 1.0);
    CHECK(b1 == doctest::Approx(1.0).epsilon(1e-14));  // phi1(0)*delta*b

    auto [a2, b2] = discretize(0.1, -1.0, 1.0);
    CHECK(a2 == doctest::Approx(0.90483741803596).epsilon(1e-12));
    CHECK(b2 == doctest::Approx(0.095162581964040).epsilon(1e-12));
}

TEST_CASE("hand-recursed scalar fixture") {
    // delta=1, A=ln(1/2), B chosen so a_d=0.5 and b_d=1; with x=[1,1], C=1
    // the recurrence gives h=[1, 1.5].
    const double A_val = std::log(0.5);
    const double B_val = 2.0 * std::log(2.0);
    Tensor x({2, 1}, {1.0, 1.0});
    Tensor delta({2, 1}, {1.0, 1.0});
    Tensor A({1, 1}, {A_val});
    Tensor B({2, 1}, {B_val, B_val});
    Tensor C({2, 1}, {1.0, 1.0});
    Tensor y = selective_scan_seq(x, delta, A, B, C);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("scan matches the naive recurrence oracle") {
    Rng rng(2024);
    Tensor x = random_tensor({8, 2}, rng);
    Tensor delta = random_tensor({8, 2}, rng, 0.01, 1.0);
    Tensor A = random_tensor({2, 4}, rng, -2.0, -0.1);
    Tensor B = random_tensor({8, 4}, rng);
    Tensor C = random_tensor({8, 4}, rng);
    Tensor want = naive_scan(x, delta, A, B, C);
    Tensor got = selective_scan_seq(x, delta, A, B, C);
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("chunked scan equals sequential scan") {
    Rng rng(77);
    const std::size_t L = 256, D = 8, N = 16;
    Tensor x = random_tensor({L, D}, rng);
    Tensor delta = random_tensor({L, D}, rng, 0.001, 0.5);
    Tensor A = random_tensor({D, N}, rng, -3.0, -0.05);
    Tensor B = random_tensor({L, N}, rng);
    Tensor C = random_tensor({L, N}, rng);
    Tensor seq = selective_scan_seq(x, delta, A, B, C);
    for (std::size_t chunk : {std::size_t(1), std::size_t(3), std::size_t(32),
                              std::size_t(256), std::size_t(1000)}) {
        Tensor got = selective_scan_chunked(x, delta, A, B, C, chunk);
        double max_abs = 0.0;
        for (std::size_t i = 0; i < seq.size(); ++i)
            max_abs = std::max(max_abs, std::fabs(got[i] - seq[i]));
        CHECK(max_abs <= 1e-10);
    }
    CHECK_THROWS_AS(selective_scan_chunked(x, delta, A, B, C, 0),
                    std::invalid_argument);
}

TEST_CASE("scan is causal") {
    Rng rng(5);
    Tensor x = random_tensor({10, 3}, rng);
    Tensor delta = random_tensor({10, 3}, rng, 0.01, 1.0);
    Tensor A = random_tensor({3, 4}, rng, -2.0, -0.1);
    Tensor B = random_tensor({10, 4}, rng);
    Tensor C = random_tensor({10, 4}, rng);
    Tensor before = selective_scan_seq(x, delta, A, B, C);
    Tensor x2 = x;
    x2.at(6, 1) += 10.0;
    Tensor after = selective_scan_seq(x2, delta, A, B, C);
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t d = 0; d < 3; ++d)
            CHECK(after.at(t, d) == before.at(t, d));
    CHECK(after.at(6, 1) != before.at(6, 1));
}

TEST_CASE("scan backward matches finite differences") {
    Rng rng(404);
    Tensor x = random_tensor({6, 2}, rng);
    Tensor delta = random_tensor({6, 2}, rng, 0.05, 0.8);
    Tensor A = random_tensor({2, 3}, rng, -2.0, -0.1);
    Tensor B = random_tensor({6, 3}, rng);
    Tensor C = random_tensor({6, 3}, rng);
    Tensor R = random_tensor({6, 2}, rng);

    ScanGrads g = selective_scan_backward(x, delta, A, B, C, R);
    auto loss = [&] {
        Tensor y = selective_scan_seq(x, delta, A, B, C);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * R[i];
        return acc;
    };
    auto reports = grad_check(
        loss,
        {{"x", x.data.data(), g.gx.data.data(), x.size()},
         {"delta", delta.data.data(), g.gdelta.data.data(), delta.size()},
         {"A", A.data.data(), g.gA.data.data(), A.size()},
         {"B", B.data.data(), g.gB.data.data(), B.size()},
         {"C", C.data.data(), g.gC.data.data(), C.size()}});
    for (const auto& r : reports) {
        INFO(r.param_name, " analytic=", r.analytic, " numeric=", r.numeric);
        CHECK(r.max_rel_err < 1e-5);
    }
}

TEST_CASE("zero-parameter block is the identity") {
    MambaBlockParams p = MambaBlockParams::zeros(3, 2);
    Rng rng(9);
    Tensor X = random_tensor({5, 3}, rng);
    Tensor out = mamba_block_forward(X, p);
    CHECK(out.data == X.data);
}

TEST_CASE("block output keeps input shape and rejects width mismatch") {
    MambaBlockParams p = random_block(4, 2, 31);
    Rng rng(1);
    Tensor X = random_tensor({7, 4}, rng);
    Tensor out = mamba_block_forward(X, p);
    CHECK(out.shape == X.shape);
    Tensor bad = random_tensor({7, 5}, rng);
    CHECK_THROWS_AS(mamba_block_forward(bad, p), std::invalid_argument);
}

TEST_CASE("block backward matches finite differences") {
    MambaBlockParams p = random_block(3, 2, 1024);
    Rng rng(7169);
    Tensor X = random_tensor({6, 3}, rng);
    Tensor R = random_tensor({6, 3}, rng);

    MambaBlockCache cache;
    mamba_block_forward(X, p, &cache);
    MambaBlockGrads g = mamba_block_backward(X, p, cache, R);

    auto loss = [&] {
        Tensor y = mamba_block_forward(X, p);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * R[i];
        return acc;
    };
    auto reports = grad_check(
        loss,
        {{"X", X.data.data(), g.gX.data.data(), X.size()},
         {"W_in", p.W_in.W.data(), g.gW_in.gW.data(), p.W_in.W.size()},
         {"conv_k", p.conv_k.data(), g.g_conv_k.data(), p.conv_k.size()},
         {"W_proj", p.W_proj.W.data(), g.gW_proj.gW.data(), p.W_proj.W.size()},
         {"A_log", p.A_log.data(), g.gA_log.data(), p.A_log.size()},
         {"delta_bias", p.delta_bias.data(), g.g_delta_bias.data(),
          p.delta_bias.size()},
         {"W_out", p.W_out.W.data(), g.gW_out.gW.data(), p.W_out.W.size()}});
    for (const auto& r : reports) {
        INFO(r.param_name, " analytic=", r.analytic, " numeric=", r.numeric);
        CHECK(r.max_rel_err < 1e-5);
    }
}
