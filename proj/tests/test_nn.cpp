#include <doctest.h>

#include <cmath>

#include "g2cal/nn.hpp"

using namespace g2cal::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

}  // namespace

TEST_CASE("dense with identity weights is the identity map") {
    Rng rng(1);
    DenseLayer d(3, 3, rng);
    std::fill(d.weights.data.begin(), d.weights.data.end(), 0.0);
    for (int i = 0; i < 3; ++i) d.weights.data[static_cast<size_t>(i) * 3 + i] = 1.0;
    std::fill(d.bias.data.begin(), d.bias.data.end(), 0.0);

    Tensor x({2, 3});
    x.data = {1.0, -2.0, 3.0, 0.5, 0.0, -1.5};
    const Tensor y = d.forward(x, false);
    CHECK(y.data == x.data);
}

TEST_CASE("dense rejects shape mismatches with both shapes in the message") {
    Rng rng(1);
    DenseLayer d(3, 2, rng);
    Tensor x({2, 4});
    CHECK_THROWS_WITH_AS(d.forward(x, false),
                         doctest::Contains("(2,4)"), std::invalid_argument);
}

TEST_CASE("conv/pool shape arithmetic for the direct grid") {
    Rng rng(2);
    Conv2dLayer conv(1, 4, 7, 2, 3, rng);
    Tensor x = random_tensor({2, 1, 106, 28}, rng);
    const Tensor y = conv.forward(x, false);
    CHECK(y.shape == std::vector<int>{2, 4, 53, 14});

    MaxPoolLayer pool(7, 2);
    const Tensor z = pool.forward(y, false);
    CHECK(z.shape == std::vector<int>{2, 4, 24, 4});

    // 27-tenor variant
    Tensor x27 = random_tensor({1, 1, 106, 27}, rng);
    Conv2dLayer conv27(1, 4, 7, 2, 3, rng);
    const Tensor y27 = conv27.forward(x27, false);
    CHECK(y27.shape == std::vector<int>{1, 4, 53, 14});
}

TEST_CASE("relu gates both value and gradient") {
    ReluLayer r;
    Tensor x({1, 4});
    x.data = {-1.0, 0.0, 2.0, -3.0};
    const Tensor y = r.forward(x, false);
    CHECK(y.data == std::vector<double>{0.0, 0.0, 2.0, 0.0});
    Tensor g({1, 4});
    g.data = {1.0, 1.0, 1.0, 1.0};
    const Tensor dx = r.backward(g);
    CHECK(dx.data == std::vector<double>{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("mse values and gradient") {
    Tensor a({1, 2}), b({1, 2});
    a.data = {1.0, 3.0};
    b.data = {0.0, 0.0};
    const MseResult r = mse(a, b);
    CHECK(r.loss == doctest::Approx(5.0));
    CHECK(r.grad.data[0] == doctest::Approx(1.0));
    CHECK(r.grad.data[1] == doctest::Approx(3.0));

    CHECK(mse(a, a).loss == 0.0);
    Tensor ones({1, 2});
    ones.data = {1.0, 1.0};
    Tensor zeros({1, 2});
    CHECK(mse(ones, zeros).loss == doctest::Approx(1.0));

    Tensor wrong({2, 1});
    CHECK_THROWS_AS(mse(a, wrong), std::invalid_argument);
}

TEST_CASE("adam single step matches a scalar hand oracle") {
    // One dense 1->1 model acts as a two-parameter system (w, b); with
    // x = 1, y = 0 the loss is (w + b)^2 and both gradients are 2(w + b).
    Model m(3);
    m.dense(1, 1);
    m.params()[0].value->data[0] = 0.5;  // w
    m.params()[1].value->data[0] = 0.0;  // b

    Tensor x({1, 1}), y({1, 1});
    x.data = {1.0};
    y.data = {0.0};
    Adam adam(m, 0.001);
    Tensor pred = m.forward(x, false);
    m.backward(mse(pred, y).grad);
    adam.step(m);

    const double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double w = 0.5, bb = 0.0, mw = 0, vw = 0, mb = 0, vb = 0;
    auto oracle_step = [&](int t) {
        const double g = 2.0 * (w + bb);
        mw = b1 * mw + (1 - b1) * g;
        vw = b2 * vw + (1 - b2) * g * g;
        mb = b1 * mb + (1 - b1) * g;
        vb = b2 * vb + (1 - b2) * g * g;
        const double bc1 = 1 - std::pow(b1, t), bc2 = 1 - std::pow(b2, t);
        w -= lr * (mw / bc1) / (std::sqrt(vw / bc2) + eps);
        bb -= lr * (mb / bc1) / (std::sqrt(vb / bc2) + eps);
    };
    oracle_step(1);
    // bias correction makes mhat = g and vhat = g^2 on the first step, so
    // the update collapses to lr * g / (|g| + eps)
    CHECK(w == doctest::Approx(0.5 - lr * 1.0 / (1.0 + eps)).epsilon(1e-15));
    CHECK(m.params()[0].value->data[0] == doctest::Approx(w).epsilon(1e-12));
    CHECK(m.params()[1].value->data[0] == doctest::Approx(bb).epsilon(1e-12));

    // second identical step
    Tensor pred2 = m.forward(x, false);
    m.backward(mse(pred2, y).grad);
    adam.step(m);
    oracle_step(2);
    CHECK(m.params()[0].value->data[0] == doctest::Approx(w).epsilon(1e-12));
    CHECK(m.params()[1].value->data[0] == doctest::Approx(bb).epsilon(1e-12));
}

TEST_CASE("adam leaves parameters unchanged on zero gradient") {
    Model m(4);
    m.dense(2, 2);
    Adam adam(m, 0.01);
    const std::vector<double> before = m.params()[0].value->data;
    for (auto& b : m.params())
        std::fill(b.grad->data.begin(), b.grad->data.end(), 0.0);
    adam.step(m);
    CHECK(m.params()[0].value->data == before);
}

TEST_CASE("adam rejects non-finite gradients") {
    Model m(4);
    m.dense(2, 2);
    Adam adam(m, 0.01);
    m.params()[0].grad->data[0] = std::nan("");
    CHECK_THROWS_AS(adam.step(m), std::runtime_error);
}

TEST_CASE("gradient check: tiny dense network") {
    Model m(5);
    m.dense(3, 4).relu().dense(4, 2);
    Rng rng(6);
    const Tensor x = random_tensor({5, 3}, rng);
    const Tensor y = random_tensor({5, 2}, rng);
    CHECK(grad_check(m, x, y) < 1e-4);
}

TEST_CASE("gradient check: tiny conv network") {
    Model m(7);
    m.conv2d(1, 2, 3, 1, 1).relu().maxpool(2, 2).flatten().dense(2 * 5 * 4, 3);
    Rng rng(8);
    const Tensor x = random_tensor({3, 1, 10, 8}, rng);
    const Tensor y = random_tensor({3, 3}, rng);
    CHECK(grad_check(m, x, y) < 1e-4);
}

TEST_CASE("gradient check: full layer stack with stride-2 kernel-7 conv") {
    Model m(9);
    m.conv2d(1, 2, 7, 2, 3).relu().maxpool(7, 2).flatten()
        .dense(2 * 3 * 1, 6).relu().dropout(0.25).dense(6, 5);
    Rng rng(10);
    const Tensor x = random_tensor({2, 1, 24, 16}, rng);
    const Tensor y = random_tensor({2, 5}, rng);
    CHECK(grad_check(m, x, y) < 1e-4);
}

TEST_CASE("gradient check: linear model is exact to FD truncation") {
    Model m(11);
    m.dense(4, 3);
    Rng rng(12);
    const Tensor x = random_tensor({6, 4}, rng);
    const Tensor y = random_tensor({6, 3}, rng);
    CHECK(grad_check(m, x, y) < 1e-8);
}

TEST_CASE("eval-mode forward is deterministic bitwise") {
    Model m(13);
    m.dense(10, 8).relu().dropout(0.25).dense(8, 5);
    Rng rng(14);
    const Tensor x = random_tensor({4, 10}, rng);
    const Tensor a = m.forward(x, false);
    const Tensor b = m.forward(x, false);
    CHECK(a.data == b.data);
}

TEST_CASE("inverted dropout preserves the activation expectation") {
    Model m(15);
    m.dropout(0.25);
    Tensor x({1, 8});
    for (int i = 0; i < 8; ++i) x.data[static_cast<size_t>(i)] = 1.0 + i;
    const Tensor eval_out = m.forward(x, false);
    CHECK(eval_out.data == x.data);

    std::vector<double> mean(8, 0.0);
    const int passes = 100000;
    for (int p = 0; p < passes; ++p) {
        const Tensor out = m.forward(x, true);
        for (int i = 0; i < 8; ++i) mean[static_cast<size_t>(i)] += out.data[static_cast<size_t>(i)];
    }
    for (int i = 0; i < 8; ++i) {
        mean[static_cast<size_t>(i)] /= passes;
        CHECK(mean[static_cast<size_t>(i)] ==
              doctest::Approx(x.data[static_cast<size_t>(i)]).epsilon(0.01));
    }
}

TEST_CASE("maxpool routes gradient only to argmax cells and conserves it") {
    MaxPoolLayer pool(2, 2);
    Tensor x({1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) x.data[static_cast<size_t>(i)] = i;
    const Tensor y = pool.forward(x, false);
    REQUIRE(y.shape == std::vector<int>{1, 1, 2, 2});
    CHECK(y.data == std::vector<double>{5, 7, 13, 15});

    Tensor g({1, 1, 2, 2});
    g.data = {1.0, 2.0, 3.0, 4.0};
    const Tensor dx = pool.backward(g);
    double routed = 0.0;
    int nonzero = 0;
    for (double v : dx.data) {
        routed += v;
        if (v != 0.0) ++nonzero;
    }
    CHECK(routed == doctest::Approx(10.0));
    CHECK(nonzero == 4);
    CHECK(dx.data[5] == 1.0);
    CHECK(dx.data[15] == 4.0);
}

TEST_CASE("maxpool tie-break picks the first cell in row-major order") {
    MaxPoolLayer pool(2, 2);
    Tensor x({1, 1, 2, 2});
    x.data = {3.0, 3.0, 3.0, 3.0};
    pool.forward(x, false);
    Tensor g({1, 1, 1, 1});
    g.data = {1.0};
    const Tensor dx = pool.backward(g);
    CHECK(dx.data == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("model round-trips through layer descriptors") {
    Model m(16);
    m.conv2d(1, 4, 7, 2, 3).relu().maxpool(7, 2).flatten()
        .dense(384, 100).relu().dropout(0.25).dense(100, 5);
    const auto desc = m.descriptors();
    Model m2 = Model::from_descriptors(desc, 17);
    CHECK(m2.descriptors() == desc);
    CHECK(m2.param_count() == m.param_count());
}
