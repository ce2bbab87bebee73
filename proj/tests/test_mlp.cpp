#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "razcert/mlp.hpp"

using namespace razcert;

namespace {

Mlp single_layer(double w, double b) {
    Mlp net;
    Layer l;
    l.w = Matrix(1, 1);
    l.w.at(0, 0) = w;
    l.b = {b};
    net.layers = {l};
    return net;
}

}  // namespace

TEST_CASE("forward: zero network maps everything to zero") {
    Rng rng(1);
    Mlp net = Mlp::create(3, {8}, 2, rng);
    for (auto& l : net.layers) {
        for (double& v : l.w.data) v = 0.0;
        for (double& v : l.b) v = 0.0;
    }
    Vec y = forward(net, Vec{0.3, -1.0, 2.0});
    CHECK(y == Vec{0.0, 0.0});
}

TEST_CASE("forward: single affine layer") {
    Mlp net = single_layer(2.0, 1.0);
    CHECK(forward(net, Vec{3.0}) == Vec{7.0});
}

TEST_CASE("forward: hidden ReLU clamps negatives") {
    Mlp net;
    Layer l1;
    l1.w = Matrix(2, 2);
    l1.w.at(0, 0) = 1.0;
    l1.w.at(1, 1) = 1.0;
    l1.b = {0.0, 0.0};
    Layer l2;
    l2.w = Matrix(2, 2);
    l2.w.at(0, 0) = 1.0;
    l2.w.at(1, 1) = 1.0;
    l2.b = {0.0, 0.0};
    net.layers = {l1, l2};
    CHECK(forward(net, Vec{-1.0, 2.0}) == Vec{0.0, 2.0});
}

TEST_CASE("forward: dimension mismatch raises") {
    Mlp net = single_layer(1.0, 0.0);
    CHECK_THROWS_AS((void)forward(net, Vec{1.0, 2.0}), DimensionError);
}

TEST_CASE("default shape chains 3x64 hidden layers") {
    Rng rng(5);
    Mlp net = Mlp::create(4, {64, 64, 64}, 1, rng);
    REQUIRE(net.layers.size() == 4);
    CHECK(net.input_dim() == 4);
    CHECK(net.output_dim() == 1);
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
        CHECK(net.layers[l].w.rows == net.layers[l + 1].w.cols);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    Rng rng(2);
    Mlp net = Mlp::create(2, {4}, 1, rng);
    ForwardCache cache;
    forward_cached(net, Vec{0.5, -0.2}, cache);
    GradientBuffer grads = GradientBuffer::zeros_like(net);
    backward(net, cache, Vec{0.0}, grads);
    for (const auto& m : grads.dw)
        for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("backward: single layer chain rule by hand") {
    Mlp net = single_layer(2.0, 1.0);
    ForwardCache cache;
    forward_cached(net, Vec{3.0}, cache);
    GradientBuffer grads = GradientBuffer::zeros_like(net);
    Vec input_grad = backward(net, cache, Vec{1.0}, grads);
    CHECK(grads.dw[0].at(0, 0) == 3.0);
    CHECK(grads.db[0][0] == 1.0);
    CHECK(input_grad == Vec{2.0});
}

TEST_CASE("backward: ReLU subgradient at zero is zero") {
    Mlp net;
    Layer l1;
    l1.w = Matrix(1, 1);
    l1.w.at(0, 0) = 1.0;
    l1.b = {0.0};
    Layer l2;
    l2.w = Matrix(1, 1);
    l2.w.at(0, 0) = 1.0;
    l2.b = {0.0};
    net.layers = {l1, l2};
    ForwardCache cache;
    forward_cached(net, Vec{0.0}, cache);
    GradientBuffer grads = GradientBuffer::zeros_like(net);
    Vec input_grad = backward(net, cache, Vec{1.0}, grads);
    CHECK(input_grad == Vec{0.0});
    CHECK(grads.dw[0].at(0, 0) == 0.0);
}

TEST_CASE("backward matches central finite differences") {
    Rng rng(7);
    Mlp net = Mlp::create(3, {6, 5}, 2, rng);
    Vec x{0.37, -0.81, 0.12};
    Vec upstream{0.7, -1.3};

    ForwardCache cache;
    forward_cached(net, x, cache);
    GradientBuffer grads = GradientBuffer::zeros_like(net);
    backward(net, cache, upstream, grads);

    auto value = [&](const Mlp& m) {
        Vec y = forward(m, x);
        return y[0] * upstream[0] + y[1] * upstream[1];
    };
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t q = 0; q < net.layers[l].w.data.size(); ++q) {
            Mlp plus = net, minus = net;
            plus.layers[l].w.data[q] += h;
            minus.layers[l].w.data[q] -= h;
            double fd = (value(plus) - value(minus)) / (2 * h);
            double an = grads.dw[l].data[q];
            worst = std::max(worst, std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
        }
        for (std::size_t q = 0; q < net.layers[l].b.size(); ++q) {
            Mlp plus = net, minus = net;
            plus.layers[l].b[q] += h;
            minus.layers[l].b[q] -= h;
            double fd = (value(plus) - value(minus)) / (2 * h);
            worst = std::max(worst, std::abs(fd - grads.db[l][q]) /
                                        std::max({1.0, std::abs(fd), std::abs(grads.db[l][q])}));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("lipschitz_upper: scalar, diagonal product, zero") {
    Mlp scalar = single_layer(2.0, 0.0);
    double l1 = lipschitz_upper(scalar, Box::centered(1, 1.0)).value;
    CHECK(l1 >= 2.0);
    CHECK(l1 <= 2.0 * 1.01 + 1e-9);

    Mlp diag;
    Layer a;
    a.w = Matrix(2, 2);
    a.w.at(0, 0) = 2.0;
    a.w.at(1, 1) = 2.0;
    a.b = {0.0, 0.0};
    Layer b;
    b.w = Matrix(2, 2);
    b.w.at(0, 0) = 3.0;
    b.w.at(1, 1) = 3.0;
    b.b = {0.0, 0.0};
    diag.layers = {a, b};
    double l2 = lipschitz_upper(diag, Box::centered(2, 1.0)).value;
    CHECK(l2 >= 6.0);
    CHECK(l2 <= 6.0 * 1.01 * 1.01 + 1e-9);

    Mlp zero = single_layer(0.0, 0.0);
    CHECK(lipschitz_upper(zero, Box::centered(1, 1.0)).value == 0.0);
}

TEST_CASE("secant slopes never exceed the norm-product bound") {
    Rng rng(11);
    Mlp net = Mlp::create(3, {16, 16}, 1, rng);
    double bound = lipschitz_upper(net, Box::centered(3, 2.0)).value;
    Rng sampler(13);
    Box box = Box::centered(3, 2.0);
    double worst = 0.0;
    for (int t = 0; t < 100000; ++t) {
        Vec x = sampler.uniform_in(box);
        Vec y = sampler.uniform_in(box);
        double dx = norm2(sub(x, y));
        if (dx < 1e-12) continue;
        double dv = std::abs(forward(net, x)[0] - forward(net, y)[0]);
        worst = std::max(worst, dv / dx);
    }
    CHECK(worst <= bound);
}

TEST_CASE("sgd_step: zero gradient, hand case, linearity") {
    Mlp net = single_layer(1.0, 0.0);
    GradientBuffer zero = GradientBuffer::zeros_like(net);
    Mlp same = sgd_step(net, zero, 0.5);
    CHECK(same.layers[0].w.at(0, 0) == 1.0);

    GradientBuffer g = GradientBuffer::zeros_like(net);
    g.dw[0].at(0, 0) = 2.0;
    Mlp stepped = sgd_step(net, g, 0.1);
    CHECK(stepped.layers[0].w.at(0, 0) == doctest::Approx(0.8).epsilon(1e-15));

    GradientBuffer g2 = GradientBuffer::zeros_like(net);
    g2.dw[0].at(0, 0) = -0.7;
    Mlp twice = sgd_step(sgd_step(net, g, 0.1), g2, 0.1);
    GradientBuffer sum = GradientBuffer::zeros_like(net);
    sum.dw[0].at(0, 0) = 2.0 - 0.7;
    Mlp once = sgd_step(net, sum, 0.1);
    CHECK(twice.layers[0].w.at(0, 0) == doctest::Approx(once.layers[0].w.at(0, 0)).epsilon(1e-15));
}

TEST_CASE("serialization round trip preserves forward outputs bit-exactly") {
    Rng rng(17);
    Mlp net = Mlp::create(4, {32, 32}, 3, rng);
    auto blob = serialize_weights(net);
    Mlp copy = Mlp::create(4, {32, 32}, 3, rng);
    deserialize_weights(copy, blob);
    Rng sampler(19);
    Box box = Box::centered(4, 3.0);
    for (int t = 0; t < 50; ++t) {
        Vec x = sampler.uniform_in(box);
        CHECK(forward(net, x) == forward(copy, x));
    }
    blob.pop_back();
    CHECK_THROWS_AS(deserialize_weights(copy, blob), FormatError);
}

TEST_CASE("abs-net fixture computes alpha|x| exactly") {
    Mlp net = razcert::testing::make_abs_net(0.6);
    CHECK(forward(net, Vec{0.5})[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(forward(net, Vec{-2.0})[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(forward(net, Vec{0.0})[0] == 0.0);
}
