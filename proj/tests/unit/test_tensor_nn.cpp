#include <doctest.h>

#include <cmath>
#include <functional>

#include "creadiff/nn.hpp"
#include "creadiff/tensor.hpp"

using namespace creadiff;

namespace {

// Central finite difference of a scalar loss w.r.t. every parameter entry,
// compared against the layer's analytic gradient.
void check_layer_gradients(nn::Layer& layer, const Tensor& input, double tol = 1e-5) {
    auto loss_of = [&](const Tensor& x) {
        Tensor y = layer.forward(x, true);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += std::sin(0.7 * static_cast<double>(i)) * y[i];
        return s;
    };

    // Analytic pass.
    Tensor y = layer.forward(input, true);
    Tensor gy = Tensor::zeros_like(y);
    for (std::size_t i = 0; i < gy.size(); ++i) gy[i] = std::sin(0.7 * static_cast<double>(i));
    nn::zero_grads(layer.params());
    Tensor gx = layer.backward(gy);

    const double h = 1e-6;
    // Input gradient.
    for (std::size_t i = 0; i < input.size(); i += std::max<std::size_t>(1, input.size() / 17)) {
        Tensor xp = input, xm = input;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (loss_of(xp) - loss_of(xm)) / (2 * h);
        CHECK(gx[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
    // Parameter gradients (forward state must be restored after perturbing).
    layer.forward(input, true);
    nn::zero_grads(layer.params());
    layer.backward(gy);
    for (auto& p : layer.params()) {
        auto& value = *p.value;
        auto& grad = *p.grad;
        for (std::size_t i = 0; i < value.size(); i += std::max<std::size_t>(1, value.size() / 13)) {
            const double orig = value[i];
            value[i] = orig + h;
            const double fp = loss_of(input);
            value[i] = orig - h;
            const double fm = loss_of(input);
            value[i] = orig;
            const double fd = (fp - fm) / (2 * h);
            CHECK(grad[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
        }
    }
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace

TEST_SUITE("tensor") {
    TEST_CASE("shape checks and element access") {
        Tensor t({2, 3, 4, 5});
        CHECK(t.size() == 120);
        t.at(1, 2, 3, 4) = 7.0;
        CHECK(t[t.size() - 1] == 7.0);
        CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
        CHECK_THROWS_AS(t.reshaped({7}), ShapeError);
    }

    TEST_CASE("matmul variants agree with naive transpose") {
        Rng rng(3);
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 2}, rng);
        Tensor c = matmul(a, b);
        Tensor bt({2, 4});
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) bt.at2(j, i) = b.at2(i, j);
        Tensor c2 = matmul_tb(a, bt);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(c2[i]));
        Tensor at({4, 3});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) at.at2(j, i) = a.at2(i, j);
        Tensor c3 = matmul_ta(at, b);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(c3[i]));
    }

    TEST_CASE("softmax is normalized and shift invariant") {
        std::vector<double> logits = {1.5, -2.0, 0.25};
        auto p = softmax(logits);
        double s = 0.0;
        for (double v : p) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        for (double& v : logits) v += 123.0;
        auto q = softmax(logits);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
    }
}

TEST_SUITE("nn gradients") {
    TEST_CASE("dense") {
        Rng rng(11);
        nn::Dense layer(5, 4, true, rng, "d");
        check_layer_gradients(layer, random_tensor({3, 5}, rng));
    }

    TEST_CASE("conv2d stride 2 pad 1") {
        Rng rng(12);
        nn::Conv2d layer(3, 4, 4, 2, 1, true, rng, "c");
        check_layer_gradients(layer, random_tensor({2, 8, 8, 3}, rng));
    }

    TEST_CASE("conv_transpose2d stride 2 pad 1 doubles size") {
        Rng rng(13);
        nn::ConvTranspose2d layer(3, 2, 4, 2, 1, true, rng, "ct");
        Tensor x = random_tensor({2, 4, 4, 3}, rng);
        Tensor y = layer.forward(x, false);
        CHECK(y.dim(1) == 8);
        CHECK(y.dim(2) == 8);
        check_layer_gradients(layer, x);
    }

    TEST_CASE("conv_transpose2d k4 s1 from 1x1 acts as dense") {
        Rng rng(14);
        nn::ConvTranspose2d layer(6, 3, 4, 1, 0, false, rng, "ct0");
        Tensor x = random_tensor({1, 1, 1, 6}, rng);
        Tensor y = layer.forward(x, false);
        CHECK(y.dim(1) == 4);
        CHECK(y.dim(2) == 4);
        check_layer_gradients(layer, x);
    }

    TEST_CASE("batchnorm train mode") {
        Rng rng(15);
        nn::BatchNorm2d layer(3, "bn");
        check_layer_gradients(layer, random_tensor({4, 3, 3, 3}, rng), 1e-4);
    }

    TEST_CASE("batchnorm eval mode uses running stats") {
        Rng rng(16);
        nn::BatchNorm2d layer(2, "bn");
        Tensor x = random_tensor({8, 2, 2, 2}, rng);
        layer.forward(x, true);
        Tensor y = layer.forward(x, false);
        CHECK(y.all_finite());
    }

    TEST_CASE("leaky relu and tanh") {
        Rng rng(17);
        nn::LeakyReLU lrelu(0.2);
        check_layer_gradients(lrelu, random_tensor({2, 6}, rng));
        nn::Tanh tanh_layer;
        check_layer_gradients(tanh_layer, random_tensor({2, 6}, rng));
    }

    TEST_CASE("sequential composes") {
        Rng rng(18);
        nn::Sequential net;
        net.add(std::make_unique<nn::Dense>(4, 8, true, rng, "fc1"));
        net.add(std::make_unique<nn::LeakyReLU>(0.2));
        net.add(std::make_unique<nn::Dense>(8, 2, true, rng, "fc2"));
        check_layer_gradients(net, random_tensor({3, 4}, rng));
    }

    TEST_CASE("dropout eval is identity, train masks and rescales") {
        nn::Dropout drop(0.5, 99);
        Tensor x({1, 100}, 1.0);
        Tensor y_eval = drop.forward(x, false);
        for (std::size_t i = 0; i < y_eval.size(); ++i) CHECK(y_eval[i] == 1.0);
        Tensor y_train = drop.forward(x, true);
        int zeros = 0;
        for (std::size_t i = 0; i < y_train.size(); ++i) {
            if (y_train[i] == 0.0) {
                ++zeros;
            } else {
                CHECK(y_train[i] == doctest::Approx(2.0));
            }
        }
        CHECK(zeros > 20);
        CHECK(zeros < 80);
    }
}

TEST_SUITE("adam") {
    TEST_CASE("minimizes a quadratic") {
        std::vector<double> w = {5.0, -3.0};
        std::vector<double> g = {0.0, 0.0};
        nn::Adam opt({{"w", &w, &g}}, {.lr = 0.1});
        for (int i = 0; i < 500; ++i) {
            g[0] = 2.0 * w[0];
            g[1] = 2.0 * w[1];
            opt.step();
        }
        CHECK(std::abs(w[0]) < 1e-3);
        CHECK(std::abs(w[1]) < 1e-3);
    }

    TEST_CASE("decoupled weight decay shrinks without gradient") {
        std::vector<double> w = {1.0};
        std::vector<double> g = {0.0};
        nn::Adam opt({{"w", &w, &g}},
                     {.lr = 0.01, .weight_decay = 0.1, .decoupled_weight_decay = true});
        opt.step();
        CHECK(w[0] < 1.0);
    }
}
