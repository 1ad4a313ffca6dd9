#include <doctest.h>

#include <cmath>
#include <random>

#include "csagc/errors.hpp"
#include "csagc/gradcheck.hpp"
#include "csagc/optim.hpp"
#include "csagc/rng.hpp"
#include "csagc/tensor.hpp"

using namespace csagc;
using ad::Tensor;

namespace {

std::mt19937_64 rng_at(std::uint64_t n) { return make_rng(42, "tensor-tests-" + std::to_string(n)); }

}  // namespace

TEST_CASE("linear_forward basics and oracle") {
    Tensor x({1, 2}, {1, 0});
    Tensor W({2, 2}, {1, 2, 3, 4});
    Tensor b({2}, {0, 0});
    Tensor y = ad::linear_forward(x, W, b);
    CHECK(y.data() == std::vector<double>{1, 2});

    Tensor x0({1, 2}, {0, 0});
    Tensor b2({2}, {5, 6});
    CHECK(ad::linear_forward(x0, W, b2).data() == std::vector<double>{5, 6});

    // independent triple-loop oracle on a random 3x4 * 4x2 case
    auto rng = rng_at(1);
    Tensor a = Tensor::randn({3, 4}, rng);
    Tensor w = Tensor::randn({4, 2}, rng);
    Tensor bias = Tensor::randn({2}, rng);
    Tensor out = ad::linear_forward(a, w, bias);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double acc = bias.data()[j];
            for (int k = 0; k < 4; ++k) acc += a.data()[i * 4 + k] * w.data()[k * 2 + j];
            CHECK(out.data()[i * 2 + j] == doctest::Approx(acc).epsilon(1e-12));
        }

    CHECK_THROWS_AS(ad::matmul(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), Tensor({2, 2}, {1, 2, 3, 4})),
                    DimensionError);
}

TEST_CASE("conv1d basics and quadruple-loop oracle") {
    {
        Tensor x({1, 1, 3}, {1, 2, 3});
        Tensor k({1, 1, 3}, {1, 0, 0});
        Tensor bias({1}, {0});
        Tensor y = ad::conv1d_forward(x, k, bias);
        CHECK(y.shape() == std::vector<int>{1, 1, 1});
        CHECK(y.data()[0] == doctest::Approx(1.0));
    }
    {
        Tensor x({1, 1, 4}, {1, 1, 1, 1});
        Tensor k({1, 1, 3}, {1, 1, 1});
        Tensor bias({1}, {0});
        Tensor y = ad::conv1d_forward(x, k, bias);
        CHECK(y.data() == std::vector<double>{3, 3});
    }
    auto rng = rng_at(2);
    const int B = 2, CI = 3, L = 16, CO = 4, K = 3, pad = 1, stride = 2;
    Tensor x = Tensor::randn({B, CI, L}, rng);
    Tensor k = Tensor::randn({CO, CI, K}, rng);
    Tensor bias = Tensor::randn({CO}, rng);
    Tensor y = ad::conv1d_forward(x, k, bias, stride, pad);
    const int lout = (L + 2 * pad - K) / stride + 1;
    REQUIRE(y.shape() == std::vector<int>{B, CO, lout});
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < CO; ++co)
            for (int o = 0; o < lout; ++o) {
                double acc = bias.data()[co];
                for (int ci = 0; ci < CI; ++ci)
                    for (int t = 0; t < K; ++t) {
                        const int pos = o * stride + t - pad;
                        if (pos < 0 || pos >= L) continue;
                        acc += x.data()[(b * CI + ci) * L + pos] *
                               k.data()[(co * CI + ci) * K + t];
                    }
                CHECK(y.data()[(b * CO + co) * lout + o] == doctest::Approx(acc).epsilon(1e-12));
            }

    CHECK_THROWS_AS(
        ad::conv1d_forward(Tensor({1, 1, 2}, {1, 2}), Tensor({1, 1, 3}, {1, 1, 1}),
                           Tensor({1}, {0})),
        DimensionError);
}

TEST_CASE("maxpool1d values, remainder, ties, oracle") {
    Tensor x({1, 1, 4}, {1, 3, 2, 0});
    CHECK(ad::maxpool1d(x, 2).data() == std::vector<double>{3, 2});

    // trailing remainder dropped
    Tensor x5({1, 1, 5}, {1, 3, 2, 0, 9});
    CHECK(ad::maxpool1d(x5, 2).data() == std::vector<double>{3, 2});

    // tie-break: gradient to the first element of each window
    Tensor c = Tensor::full({1, 1, 4}, 7.0, true);
    Tensor loss = ad::sum(ad::maxpool1d(c, 2));
    ad::backward(loss);
    CHECK(c.grad() == std::vector<double>{1, 0, 1, 0});

    auto rng = rng_at(3);
    Tensor r = Tensor::randn({2, 3, 20}, rng);
    Tensor p = ad::maxpool1d(r, 4);
    for (int b = 0; b < 2; ++b)
        for (int ch = 0; ch < 3; ++ch)
            for (int o = 0; o < 5; ++o) {
                double m = -1e300;
                for (int t = 0; t < 4; ++t)
                    m = std::max(m, r.data()[(b * 3 + ch) * 20 + o * 4 + t]);
                CHECK(p.data()[(b * 3 + ch) * 5 + o] == m);
            }

    CHECK_THROWS_AS(ad::maxpool1d(Tensor({1, 1, 1}, {1}), 2), DimensionError);
}

TEST_CASE("leaky_relu values and gradient") {
    Tensor a = Tensor::scalar(5.0);
    CHECK(ad::leaky_relu(a, 0.01).item() == doctest::Approx(5.0));
    CHECK(ad::leaky_relu(Tensor::scalar(-2.0), 0.1).item() == doctest::Approx(-0.2));

    Tensor x({2}, {-1.0, 1.0}, true);
    Tensor loss = ad::sum(ad::leaky_relu(x, 0.1));
    ad::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(0.1));
    CHECK(x.grad()[1] == doctest::Approx(1.0));
}

TEST_CASE("softmax correctness, stability, shift invariance") {
    Tensor z({2}, {0, 0});
    Tensor s = ad::softmax(z);
    CHECK(s.data()[0] == doctest::Approx(0.5).epsilon(1e-12));

    Tensor big({3}, {1000, 1000, 1000});
    Tensor sb = ad::softmax(big);
    for (double v : sb.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    auto rng = rng_at(4);
    Tensor r = Tensor::randn({5}, rng);
    Tensor sr = ad::softmax(r);
    long double denom = 0;
    for (double v : r.data()) denom += expl((long double)v);
    double total = 0;
    for (int i = 0; i < 5; ++i) {
        CHECK(sr.data()[i] ==
              doctest::Approx(double(expl((long double)r.data()[i]) / denom)).epsilon(1e-12));
        total += sr.data()[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    Tensor shifted = ad::softmax(ad::add_scalar(r, 123.25));
    for (int i = 0; i < 5; ++i)
        CHECK(shifted.data()[i] == doctest::Approx(sr.data()[i]).epsilon(1e-12));
}

TEST_CASE("backward basics and contracts") {
    Tensor x({3}, {1, 2, 3}, true);
    Tensor loss = ad::sum(x);
    ad::backward(loss);
    CHECK(x.grad() == std::vector<double>{1, 1, 1});

    Tensor y({2}, {1, 2}, true);
    Tensor l2 = ad::sum(ad::mul(y, y));
    ad::backward(l2);
    CHECK(y.grad()[0] == doctest::Approx(2.0));
    CHECK(y.grad()[1] == doctest::Approx(4.0));

    Tensor vec({2}, {1, 2}, true);
    Tensor not_scalar = ad::mul_scalar(vec, 2.0);
    CHECK_THROWS_AS(ad::backward(not_scalar), ContractError);
}

TEST_CASE("adam optimizer behavior") {
    Tensor w = Tensor::scalar(0.0, true);
    std::vector<Tensor> params{w};
    ad::AdamState state = ad::AdamState::init(params);

    // bias-corrected first step moves by ~lr for unit gradient
    w.grad().assign(1, 1.0);
    ad::adam_step(params, state, 0.01);
    CHECK(w.data()[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(state.step_count == 1);

    // zero gradient (no accumulated momentum): parameter unchanged, step counts
    Tensor wz = Tensor::scalar(1.5, true);
    std::vector<Tensor> pz{wz};
    ad::AdamState sz = ad::AdamState::init(pz);
    wz.grad().assign(1, 0.0);
    ad::adam_step(pz, sz, 0.01);
    CHECK(wz.data()[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(sz.step_count == 1);

    // minimize (w-3)^2 from 0
    Tensor v = Tensor::scalar(0.0, true);
    std::vector<Tensor> p2{v};
    ad::AdamState s2 = ad::AdamState::init(p2);
    for (int i = 0; i < 100; ++i) {
        ad::zero_grads(p2);
        Tensor diff = ad::add_scalar(v, -3.0);
        Tensor loss = ad::sum(ad::mul(diff, diff));
        ad::backward(loss);
        ad::adam_step(p2, s2, 0.1);
    }
    CHECK(std::fabs(v.data()[0] - 3.0) < 0.1);
}

TEST_CASE("grad_check on layers") {
    auto rng = rng_at(5);

    // identity-style closure: exact to machine precision
    {
        Tensor x = Tensor::randn({4}, rng, 1.0, true);
        std::vector<Tensor> params{x};
        double err = ad::grad_check([&] { return ad::sum(x); }, params);
        CHECK(err < 1e-9);
    }
    // linear layer
    {
        Tensor x = Tensor::randn({3, 4}, rng);
        Tensor W = Tensor::randn({4, 2}, rng, 1.0, true);
        Tensor b = Tensor::randn({2}, rng, 1.0, true);
        std::vector<Tensor> params{W, b};
        double err = ad::grad_check(
            [&] { return ad::mean(ad::mul(ad::linear_forward(x, W, b),
                                          ad::linear_forward(x, W, b))); },
            params);
        CHECK(err < 1e-6);
    }
    // eps contract
    {
        Tensor x = Tensor::randn({2}, rng, 1.0, true);
        std::vector<Tensor> params{x};
        CHECK_THROWS_AS(ad::grad_check([&] { return ad::sum(x); }, params, 0.5), ContractError);
    }
}

TEST_CASE("grad_check across all op kinds") {
    auto rng = rng_at(6);
    auto check = [&](auto forward, std::vector<Tensor> params, double tol = 1e-4) {
        CHECK(ad::grad_check(forward, params) < tol);
    };

    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({3, 4}, rng, 1.0, true);
    check([&] { return ad::mean(ad::mul(ad::add(a, b), ad::sub(a, b))); }, {a, b});
    check([&] { return ad::mean(ad::sigmoid(a)); }, {a});
    check([&] { return ad::mean(ad::leaky_relu(a, 0.2)); }, {a});
    check([&] { return ad::mean(ad::relu(ad::add_scalar(a, 0.05))); }, {a});
    check([&] { return ad::mean(ad::log_clamped(ad::sigmoid(a))); }, {a});
    check([&] { return ad::mean(ad::softmax(a)); }, {a});
    check([&] { return ad::sum(ad::mul(ad::softmax(a), b)); }, {a});

    // structural
    check([&] { return ad::mean(ad::mul(ad::concat_cols(a, b), ad::concat_cols(b, a))); },
          {a, b});
    check([&] { return ad::mean(ad::slice_cols(a, 1, 3)); }, {a});
    check([&] { return ad::mean(ad::mul(ad::pad_cols(a, 6), ad::pad_cols(b, 6))); }, {a, b});
    check([&] { return ad::mean(ad::reshape(a, {4, 3})); }, {a});

    // linear algebra
    Tensor m1 = Tensor::randn({2, 5}, rng, 1.0, true);
    Tensor m2 = Tensor::randn({5, 3}, rng, 1.0, true);
    check([&] { return ad::mean(ad::matmul(m1, m2)); }, {m1, m2});
    Tensor w = Tensor::randn({4}, rng, 1.0, true);
    check([&] { return ad::mean(ad::row_scale(a, w)); }, {a, w});
    Tensor A = Tensor::randn({2, 3, 4}, rng, 1.0, true);
    Tensor B = Tensor::randn({2, 4, 5}, rng, 1.0, true);
    Tensor Bt = Tensor::randn({2, 5, 4}, rng, 1.0, true);
    check([&] { return ad::mean(ad::batched_matmul(A, B)); }, {A, B});
    check([&] { return ad::mean(ad::batched_matmul(A, Bt, true)); }, {A, Bt});

    // nn ops
    Tensor x3 = Tensor::randn({2, 3, 8}, rng, 1.0, true);
    Tensor kk = Tensor::randn({4, 3, 3}, rng, 1.0, true);
    Tensor kb = Tensor::randn({4}, rng, 1.0, true);
    check([&] { return ad::mean(ad::conv1d_forward(x3, kk, kb, 1, 1)); }, {x3, kk, kb});
    check([&] { return ad::mean(ad::maxpool1d(x3, 2)); }, {x3});
    check([&] { return ad::mean(ad::mul(ad::channel_avg(x3), ad::channel_max(x3))); }, {x3});
    Tensor gate = Tensor::randn({2, 3}, rng, 1.0, true);
    check([&] { return ad::mean(ad::scale_channels(x3, ad::sigmoid(gate))); }, {x3, gate});
    Tensor toks = Tensor::randn({2, 4, 3}, rng, 1.0, true);
    Tensor cond({2, 2}, {1, 0, 0, 1});
    check([&] { return ad::mean(ad::mul(ad::token_concat(toks, cond),
                                        ad::token_concat(toks, cond))); },
          {toks});
}

TEST_CASE("dropout semantics") {
    auto rng = rng_at(7);
    Tensor x = Tensor::full({4, 8}, 1.0);
    Tensor eval_out = ad::dropout(x, 0.5, rng, false);
    CHECK(eval_out.data() == x.data());  // identity in eval mode

    auto rng2 = rng_at(8);
    Tensor t = ad::dropout(x, 0.5, rng2, true);
    int zeros = 0;
    for (double v : t.data()) {
        CHECK((v == 0.0 || v == doctest::Approx(2.0)));  // inverted scaling
        zeros += v == 0.0;
    }
    CHECK(zeros > 0);
    CHECK(zeros < 32);
}

TEST_CASE("determinism and finiteness") {
    auto r1 = rng_at(9);
    auto r2 = rng_at(9);
    Tensor a = Tensor::randn({3, 3}, r1);
    Tensor b = Tensor::randn({3, 3}, r2);
    CHECK(a.data() == b.data());

    Tensor inf({1}, {std::numeric_limits<double>::infinity()});
    CHECK_FALSE(ad::all_finite(inf));
    CHECK_THROWS_AS(ad::check_finite(inf, "test"), NumericError);
}
