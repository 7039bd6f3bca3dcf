#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "slcnn/ops.hpp"
#include "slcnn/rng.hpp"

using namespace slcnn;

namespace {

template <typename T>
Tensor<T> random_tensor(long b, long c, long t, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> out(b, c, t);
    for (long i = 0; i < out.size(); ++i) out.flat(i) = static_cast<T>(rng.uniform(lo, hi));
    return out;
}

} // namespace

TEST_CASE("conv1d hand examples") {
    // [1,2,3,4] * [1,0,-1], stride 1, valid -> [-2,-2]
    Tensor<float> in(1, 1, 4, {1, 2, 3, 4});
    Tensor<float> w(1, 1, 3, {1, 0, -1});
    Tensor<float> b(1, 1, 1);
    Tensor<float> out = conv1d_forward(in, w, b, 1, PadMode::valid);
    REQUIRE(out.time() == 2);
    CHECK(out.at(0, 0, 0) == doctest::Approx(-2));
    CHECK(out.at(0, 0, 1) == doctest::Approx(-2));

    // [1,2,3,4,5] * [1,-1], stride 2, valid -> [-1,-1], length floor((5-2)/2)+1 = 2
    Tensor<float> in2(1, 1, 5, {1, 2, 3, 4, 5});
    Tensor<float> w2(1, 1, 2, {1, -1});
    Tensor<float> out2 = conv1d_forward(in2, w2, b, 2, PadMode::valid);
    REQUIRE(out2.time() == 2);
    CHECK(out2.at(0, 0, 0) == doctest::Approx(-1));
    CHECK(out2.at(0, 0, 1) == doctest::Approx(-1));
}

TEST_CASE("conv1d shape errors name both shapes") {
    Tensor<float> in(1, 2, 8);
    Tensor<float> w(3, 4, 2); // in_ch 4 != 2
    Tensor<float> b(1, 3, 1);
    try {
        conv1d_forward(in, w, b, 1, PadMode::valid);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(1x2x8)") != std::string::npos);
        CHECK(msg.find("(3x4x2)") != std::string::npos);
    }
    // kernel longer than input in valid mode
    Tensor<float> w_long(1, 2, 9);
    Tensor<float> b1(1, 1, 1);
    CHECK_THROWS_AS(conv1d_forward(in, w_long, b1, 1, PadMode::valid), ShapeError);
}

TEST_CASE("conv1d matches the naive direct-sum oracle on random shapes") {
    Rng rng(42);
    for (int round = 0; round < 40; ++round) {
        const long B = 1 + static_cast<long>(rng.below(3));
        const long Cin = 1 + static_cast<long>(rng.below(4));
        const long Cout = 1 + static_cast<long>(rng.below(4));
        const long K = 1 + static_cast<long>(rng.below(5));
        const long T = K + static_cast<long>(rng.below(32 - K + 1));
        const bool same = rng.below(2) == 0;
        const long stride = same ? 1 : 1 + static_cast<long>(rng.below(3));

        Tensor<float> in = random_tensor<float>(B, Cin, T, rng);
        Tensor<float> w = random_tensor<float>(Cout, Cin, K, rng);
        Tensor<float> b = random_tensor<float>(1, Cout, 1, rng);

        const PadMode pad = same ? PadMode::same : PadMode::valid;
        Tensor<float> got = conv1d_forward(in, w, b, stride, pad);
        Tensor<float> want = oracle::conv1d_naive(in, w, b, stride, pad);

        REQUIRE(got.same_shape(want));
        CHECK(oracle::rel_distance(got, want) < 1e-6);
    }
}

TEST_CASE("conv1d valid-mode length formula") {
    Rng rng(7);
    Tensor<float> bias(1, 1, 1);
    for (int round = 0; round < 50; ++round) {
        const long K = 1 + static_cast<long>(rng.below(6));
        const long T = K + static_cast<long>(rng.below(40));
        const long stride = 1 + static_cast<long>(rng.below(4));
        Tensor<float> in = random_tensor<float>(1, 1, T, rng);
        Tensor<float> w = random_tensor<float>(1, 1, K, rng);
        Tensor<float> out = conv1d_forward(in, w, bias, stride, PadMode::valid);
        CHECK(out.time() == (T - K) / stride + 1);
    }
}

TEST_CASE("conv1d same mode keeps length at stride 1") {
    Rng rng(9);
    for (long K = 1; K <= 5; ++K) {
        const long T = 12;
        Tensor<float> in = random_tensor<float>(2, 2, T, rng);
        Tensor<float> w = random_tensor<float>(3, 2, K, rng);
        Tensor<float> b = random_tensor<float>(1, 3, 1, rng);
        CHECK(conv1d_forward(in, w, b, 1, PadMode::same).time() == T);
    }
}

TEST_CASE("conv1d is deterministic") {
    Rng rng(3);
    Tensor<float> in = random_tensor<float>(2, 3, 16, rng);
    Tensor<float> w = random_tensor<float>(4, 3, 3, rng);
    Tensor<float> b = random_tensor<float>(1, 4, 1, rng);
    Tensor<float> a = conv1d_forward(in, w, b, 1, PadMode::same);
    Tensor<float> c = conv1d_forward(in, w, b, 1, PadMode::same);
    CHECK(bitwise_equal(a, c));
}

TEST_CASE("maxpool1d examples and argmax routing") {
    Tensor<float> in(1, 1, 6, {1, 3, 2, 5, 4, 6});
    std::vector<long> argmax;
    Tensor<float> out = maxpool1d_forward(in, 3, &argmax);
    REQUIRE(out.time() == 2);
    CHECK(out.at(0, 0, 0) == 3);
    CHECK(out.at(0, 0, 1) == 6);

    // constant input: same constant, shorter
    Tensor<float> c(2, 2, 8);
    c.fill(0.25f);
    Tensor<float> cp = maxpool1d_forward(c, 4, nullptr);
    CHECK(cp.time() == 2);
    for (long i = 0; i < cp.size(); ++i) CHECK(cp.flat(i) == 0.25f);

    // non-divisible length errors, naming T and pool
    Tensor<float> bad(1, 1, 5);
    try {
        maxpool1d_forward(bad, 2, nullptr);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("5") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }

    // tie: first occurrence wins, so backward routes there
    Tensor<float> tie(1, 1, 2, {7, 7});
    std::vector<long> am;
    maxpool1d_forward(tie, 2, &am);
    REQUIRE(am.size() == 1);
    CHECK(am[0] == 0);
    Tensor<float> g(1, 1, 1, {1.5f});
    Tensor<float> din = maxpool1d_backward(2, am, g);
    CHECK(din.at(0, 0, 0) == 1.5f);
    CHECK(din.at(0, 0, 1) == 0.0f);
}

TEST_CASE("avgpool1d forward/backward agree with the mean") {
    Tensor<float> in(1, 1, 4, {1, 2, 3, 5});
    Tensor<float> out = avgpool1d_forward(in, 2);
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.5));
    CHECK(out.at(0, 0, 1) == doctest::Approx(4.0));
    Tensor<float> g(1, 1, 2, {2, 4});
    Tensor<float> din = avgpool1d_backward(4, 2, g);
    CHECK(din.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(din.at(0, 0, 3) == doctest::Approx(2.0));
}

TEST_CASE("batchnorm1d normalizes a {1,2,3} batch") {
    Tensor<double> in(3, 1, 1, {1, 2, 3});
    Tensor<double> gamma(1, 1, 1, {1});
    Tensor<double> beta(1, 1, 1, {0});
    Tensor<double> rm(1, 1, 1), rv(1, 1, 1);
    rv.fill(1.0);
    Tensor<double> out = batchnorm1d_forward(in, gamma, beta, Mode::train, rm, rv, 1e-5, 0.9,
                                             static_cast<BnCache<double>*>(nullptr));
    const double expect = 1.0 / std::sqrt(2.0 / 3.0 + 1e-5);
    CHECK(out.at(0, 0, 0) == doctest::Approx(-expect).epsilon(1e-9));
    CHECK(out.at(1, 0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(out.at(2, 0, 0) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(expect == doctest::Approx(1.2247).epsilon(1e-4));

    // running stats picked up 10% of the batch statistics
    CHECK(rm.at(0, 0, 0) == doctest::Approx(0.2));
    CHECK(rv.at(0, 0, 0) == doctest::Approx(0.9 + 0.1 * (2.0 / 3.0)));
}

TEST_CASE("batchnorm1d gamma=0 gives beta everywhere") {
    Rng rng(11);
    Tensor<float> in = random_tensor<float>(4, 3, 5, rng);
    Tensor<float> gamma(1, 3, 1);
    Tensor<float> beta(1, 3, 1);
    beta.fill(0.75f);
    Tensor<float> rm(1, 3, 1), rv(1, 3, 1);
    rv.fill(1.0f);
    Tensor<float> out = batchnorm1d_forward(in, gamma, beta, Mode::train, rm, rv, 1e-5f, 0.9f,
                                            static_cast<BnCache<float>*>(nullptr));
    for (long i = 0; i < out.size(); ++i) CHECK(out.flat(i) == 0.75f);
}

TEST_CASE("batchnorm1d train output has mean 0 and variance 1 per channel") {
    Rng rng(13);
    Tensor<double> in = random_tensor<double>(6, 4, 10, rng, -3.0, 5.0);
    Tensor<double> gamma(1, 4, 1);
    gamma.fill(1.0);
    Tensor<double> beta(1, 4, 1);
    Tensor<double> rm(1, 4, 1), rv(1, 4, 1);
    rv.fill(1.0);
    Tensor<double> out = batchnorm1d_forward(in, gamma, beta, Mode::train, rm, rv, 1e-5, 0.9,
                                             static_cast<BnCache<double>*>(nullptr));
    const long N = out.batch() * out.time();
    for (long c = 0; c < 4; ++c) {
        double sum = 0, sq = 0;
        for (long bi = 0; bi < out.batch(); ++bi) {
            for (long t = 0; t < out.time(); ++t) {
                sum += out.at(bi, c, t);
                sq += out.at(bi, c, t) * out.at(bi, c, t);
            }
        }
        const double mean = sum / N;
        const double var = sq / N - mean * mean;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batchnorm1d train mode rejects population 1") {
    Tensor<float> in(1, 2, 1);
    Tensor<float> gamma(1, 2, 1), beta(1, 2, 1), rm(1, 2, 1), rv(1, 2, 1);
    CHECK_THROWS_AS(batchnorm1d_forward(in, gamma, beta, Mode::train, rm, rv, 1e-5f, 0.9f,
                                        static_cast<BnCache<float>*>(nullptr)),
                    ValueError);
}

TEST_CASE("batchnorm1d infer mode uses running stats and leaves them alone") {
    Tensor<float> in(2, 1, 2, {4, 4, 4, 4});
    Tensor<float> gamma(1, 1, 1, {1});
    Tensor<float> beta(1, 1, 1, {0});
    Tensor<float> rm(1, 1, 1, {4});
    Tensor<float> rv(1, 1, 1, {1});
    Tensor<float> out = batchnorm1d_forward(in, gamma, beta, Mode::infer, rm, rv, 1e-5f, 0.9f,
                                            static_cast<BnCache<float>*>(nullptr));
    for (long i = 0; i < out.size(); ++i) CHECK(out.flat(i) == doctest::Approx(0.0));
    CHECK(rm.at(0, 0, 0) == 4.0f);
    CHECK(rv.at(0, 0, 0) == 1.0f);
}

TEST_CASE("dense examples") {
    // identity weights, zero bias
    Tensor<float> in(2, 3, 1, {1, 2, 3, 4, 5, 6});
    Tensor<float> w(3, 3, 1, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor<float> b(1, 3, 1);
    Tensor<float> out = dense_forward(in, w, b);
    for (long i = 0; i < in.size(); ++i) CHECK(out.flat(i) == in.flat(i));

    // 1x1: w=2, b=1, x=3 -> 7
    Tensor<float> x1(1, 1, 1, {3});
    Tensor<float> w1(1, 1, 1, {2});
    Tensor<float> b1(1, 1, 1, {1});
    CHECK(dense_forward(x1, w1, b1).at(0, 0, 0) == doctest::Approx(7));

    // dimension mismatch
    Tensor<float> wbad(2, 4, 1);
    Tensor<float> bbad(1, 2, 1);
    CHECK_THROWS_AS(dense_forward(in, wbad, bbad), ShapeError);
}

TEST_CASE("activation examples") {
    Tensor<float> x(1, 1, 3, {-1, 0, 2});
    Tensor<float> r = relu_forward(x);
    CHECK(r.at(0, 0, 0) == 0.0f);
    CHECK(r.at(0, 0, 1) == 0.0f);
    CHECK(r.at(0, 0, 2) == 2.0f);

    Tensor<float> z(1, 1, 1, {0});
    CHECK(sigmoid_forward(z).at(0, 0, 0) == doctest::Approx(0.5));

    // extreme logits stay strictly inside (0,1) after clamping
    Tensor<float> ext(1, 1, 2, {-100, 100});
    Tensor<float> s = sigmoid_forward(ext);
    CHECK(s.at(0, 0, 0) > 0.0f);
    CHECK(s.at(0, 0, 1) < 1.0f);

    Tensor<float> uniform(1, 10, 1);
    uniform.fill(1.25f);
    Tensor<float> sm = softmax_forward(uniform);
    for (long c = 0; c < 10; ++c) CHECK(sm.at(0, c, 0) == doctest::Approx(0.1));
}

TEST_CASE("softmax rows sum to 1 on random logits") {
    Rng rng(17);
    Tensor<float> x = random_tensor<float>(5, 7, 3, rng, -8.0, 8.0);
    Tensor<float> p = softmax_forward(x);
    for (long bi = 0; bi < 5; ++bi) {
        for (long t = 0; t < 3; ++t) {
            double sum = 0;
            for (long c = 0; c < 7; ++c) sum += p.at(bi, c, t);
            CHECK(std::fabs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("bce examples and target validation") {
    Tensor<float> p(1, 1, 1, {0.5f});
    Tensor<float> y(1, 1, 1, {1.0f});
    CHECK(bce_loss<float>(p, y, nullptr) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    Tensor<float> ybad(1, 1, 1, {0.5f});
    CHECK_THROWS_AS(bce_loss<float>(p, ybad, nullptr), ValueError);
}

TEST_CASE("ce of uniform probabilities is ln(num_classes)") {
    Tensor<float> p(2, 10, 1);
    p.fill(0.1f);
    CHECK(ce_loss<float>(p, {3, 7}, nullptr) == doctest::Approx(std::log(10.0)).epsilon(1e-6));
    CHECK_THROWS_AS(ce_loss<float>(p, {3, 10}, nullptr), ValueError);
}

TEST_CASE("losses match a straight-line double reference on random batches") {
    Rng rng(23);
    // bce
    Tensor<float> p(4, 6, 1);
    Tensor<float> y(4, 6, 1);
    for (long i = 0; i < p.size(); ++i) {
        p.flat(i) = static_cast<float>(rng.uniform(0.05, 0.95));
        y.flat(i) = rng.below(2) ? 1.0f : 0.0f;
    }
    const double got_bce = bce_loss<float>(p, y, nullptr);
    double want_bce = 0.0;
    for (long i = 0; i < p.size(); ++i) {
        const double pi = p.flat(i), yi = y.flat(i);
        want_bce += -(yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi));
    }
    want_bce /= static_cast<double>(p.size());
    CHECK(std::fabs(got_bce - want_bce) / want_bce < 1e-6);

    // ce over softmax probabilities
    Tensor<float> logits = random_tensor<float>(5, 8, 1, rng, -2.0, 2.0);
    Tensor<float> probs = softmax_forward(logits);
    std::vector<long> labels;
    for (long i = 0; i < 5; ++i) labels.push_back(static_cast<long>(rng.below(8)));
    const double got_ce = ce_loss<float>(probs, labels, nullptr);
    double want_ce = 0.0;
    for (long i = 0; i < 5; ++i) {
        want_ce += -std::log(static_cast<double>(probs.at(i, labels[static_cast<size_t>(i)], 0)));
    }
    want_ce /= 5.0;
    CHECK(std::fabs(got_ce - want_ce) / want_ce < 1e-6);
}

TEST_CASE("sgd_step: lr=0 leaves values bitwise unchanged but advances momentum") {
    Param<float> p(1, 1, 3);
    p.value = Tensor<float>(1, 1, 3, {1.0f, -2.0f, 0.5f});
    p.grad = Tensor<float>(1, 1, 3, {0.1f, 0.2f, -0.3f});
    Tensor<float> before = p.value;
    std::vector<Param<float>*> params{&p};
    sgd_step<float>(params, 0.0f, 0.9f, true);
    CHECK(bitwise_equal(p.value, before));
    CHECK(p.momentum.at(0, 0, 0) == doctest::Approx(0.1));
}

TEST_CASE("sgd_step basic update") {
    Param<float> p(1, 1, 1);
    p.value.fill(1.0f);
    p.grad.fill(0.5f);
    std::vector<Param<float>*> params{&p};
    sgd_step<float>(params, 0.1f, 0.0f, false);
    CHECK(p.value.at(0, 0, 0) == doctest::Approx(0.95));
}

TEST_CASE("sgd_step momentum matches a hand-unrolled recurrence over two steps") {
    // recurrence (double, written out straight-line):
    //   v1 = mu*0 + g1 ; w1 = w0 - lr*(g1 + mu*v1)   [nesterov]
    //   v2 = mu*v1 + g2; w2 = w1 - lr*(g2 + mu*v2)
    const double mu = 0.9, lr = 0.05, g1 = 0.4, g2 = -0.2, w0 = 2.0;

    for (bool nesterov : {true, false}) {
        Param<double> p(1, 1, 1);
        p.value.fill(w0);
        std::vector<Param<double>*> params{&p};

        p.grad.fill(g1);
        sgd_step<double>(params, lr, mu, nesterov);
        p.grad.fill(g2);
        sgd_step<double>(params, lr, mu, nesterov);

        const double v1 = mu * 0.0 + g1;
        const double v2 = mu * v1 + g2;
        double w1, w2;
        if (nesterov) {
            w1 = w0 - lr * (g1 + mu * v1);
            w2 = w1 - lr * (g2 + mu * v2);
        } else {
            w1 = w0 - lr * v1;
            w2 = w1 - lr * v2;
        }
        CHECK(p.value.at(0, 0, 0) == w2);
        CHECK(p.momentum.at(0, 0, 0) == v2);
    }
}

TEST_CASE("debug finite checking flags NaN escapes") {
    set_debug_checks(true);
    Tensor<float> in(1, 1, 4, {1, std::numeric_limits<float>::quiet_NaN(), 3, 4});
    Tensor<float> w(1, 1, 2, {1, 1});
    Tensor<float> b(1, 1, 1);
    CHECK_THROWS_AS(conv1d_forward(in, w, b, 1, PadMode::valid), ValueError);
    set_debug_checks(false);
    CHECK_NOTHROW(conv1d_forward(in, w, b, 1, PadMode::valid));
}
