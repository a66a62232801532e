#include <cmath>
#include <vector>

#include "doctest.h"
#include "edgesr/gradcheck.hpp"
#include "edgesr/ops.hpp"
#include "helpers.hpp"

using namespace edgesr;
using edgesr::testing::random_tensor;
namespace op = edgesr::ops;

TEST_CASE("conv2d: sum of ones under full overlap") {
    Tensor x({1, 1, 3, 3}, 1.f);
    Tensor w({1, 1, 3, 3}, 1.f);
    Tensor b({1}, 0.f);
    Tensor y = op::conv2d(x, w, b, 1, 1);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    CHECK(y.data()[4] == doctest::Approx(9.0));
    CHECK(y.data()[0] == doctest::Approx(4.0));  // corner sees 2x2 overlap
    tape::clear();
}

TEST_CASE("conv2d: identity 1x1 kernel") {
    Rng rng(7);
    Tensor x = random_tensor({2, 1, 5, 4}, rng);
    Tensor w({1, 1, 1, 1}, {1.f});
    Tensor y = op::conv2d(x, w, Tensor(), 1, 0);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
    tape::clear();
}

TEST_CASE("conv2d: shape errors name the offending axis") {
    Tensor x({1, 3, 8, 8}, 0.f);
    Tensor w({4, 2, 3, 3}, 0.f);
    CHECK_THROWS_WITH_AS(op::conv2d(x, w, Tensor(), 1, 1),
                         doctest::Contains("channel"), std::invalid_argument);
    Tensor w2({4, 3, 2, 2}, 0.f);
    CHECK_THROWS_AS(op::conv2d(x, w2, Tensor(), 1, 1), std::invalid_argument);
}

TEST_CASE("conv2d: gradients match finite differences") {
    Rng rng(11);
    Tensor x = random_tensor({2, 3, 8, 8}, rng, -1.f, 1.f, true);
    Tensor w = random_tensor({4, 3, 3, 3}, rng, -0.5f, 0.5f, true);
    Tensor b = random_tensor({4}, rng, -0.1f, 0.1f, true);
    Tensor t = random_tensor({2, 4, 8, 8}, rng);
    auto fwd = [&] { return op::mse_mean(op::conv2d(x, w, b, 1, 1), t); };
    auto rep = check_gradients(fwd, {x, w, b});
    CHECK_MESSAGE(rep.pass, rep.worst);
}

TEST_CASE("conv2d: strided gradients") {
    Rng rng(12);
    Tensor x = random_tensor({1, 2, 7, 7}, rng, -1.f, 1.f, true);
    Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5f, 0.5f, true);
    Tensor b = random_tensor({3}, rng, -0.1f, 0.1f, true);
    Tensor t = random_tensor({1, 3, 4, 4}, rng);
    auto fwd = [&] { return op::mse_mean(op::conv2d(x, w, b, 2, 1), t); };
    auto rep = check_gradients(fwd, {x, w, b});
    CHECK_MESSAGE(rep.pass, rep.worst);
}

TEST_CASE("batch_norm: constant per-channel input maps to zeros") {
    Tensor x({2, 3, 4, 4}, 0.f);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i) x.data()[(n * 3 + c) * 16 + i] = 1.f + c;
    BnState st(3);
    Tensor y = op::batch_norm(x, st, true);
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(0.0));
    tape::clear();
}

TEST_CASE("batch_norm: idempotent on normalized input as eps -> 0") {
    Rng rng(3);
    const int N = 4, C = 2, H = 8, W = 8;
    Tensor x = random_tensor({N, C, H, W}, rng);
    // normalize by hand first
    for (int c = 0; c < C; ++c) {
        double s = 0, s2 = 0;
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < H * W; ++i) s += x.data()[(n * C + c) * H * W + i];
        const double mu = s / (N * H * W);
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < H * W; ++i) {
                double d = x.data()[(n * C + c) * H * W + i] - mu;
                s2 += d * d;
            }
        const double sd = std::sqrt(s2 / (N * H * W));
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < H * W; ++i) {
                float& v = x.data()[(n * C + c) * H * W + i];
                v = static_cast<float>((v - mu) / sd);
            }
    }
    BnState st(C);
    Tensor y = op::batch_norm(x, st, true, 1e-12f);
    for (std::size_t i = 0; i < y.numel(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));
    tape::clear();
}

TEST_CASE("batch_norm: train-mode statistics within tolerance") {
    Rng rng(5);
    Tensor x = random_tensor({4, 8, 16, 16}, rng, -3.f, 5.f);
    BnState st(8);
    Tensor y = op::batch_norm(x, st, true);
    const int m = 4 * 16 * 16;
    for (int c = 0; c < 8; ++c) {
        double s = 0, s2 = 0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 256; ++i) {
                double v = y.data()[(n * 8 + c) * 256 + i];
                s += v;
                s2 += v * v;
            }
        const double mean = s / m;
        const double var = s2 / m - mean * mean;
        CHECK(std::fabs(mean) < 1e-4);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
    tape::clear();
}

TEST_CASE("batch_norm: single element per channel is an error in train mode") {
    Tensor x({1, 2, 1, 1}, 1.f);
    BnState st(2);
    CHECK_THROWS_AS(op::batch_norm(x, st, true), std::invalid_argument);
}

TEST_CASE("batch_norm: train-mode gradient check") {
    Rng rng(6);
    Tensor x = random_tensor({2, 3, 4, 4}, rng, -2.f, 2.f, true);
    Tensor t = random_tensor({2, 3, 4, 4}, rng);
    BnState st(3);
    auto fwd = [&] { return op::mse_mean(op::batch_norm(x, st, true), t); };
    auto rep = check_gradients(fwd, {x});
    CHECK_MESSAGE(rep.pass, rep.worst);
}

TEST_CASE("prelu: definition and degenerate cases") {
    Tensor x({1, 1, 1, 3}, {-2.f, 0.f, 3.f});
    Tensor a({1}, {0.25f});
    Tensor y = op::prelu(x, a);
    CHECK(y.data()[0] == doctest::Approx(-0.5));
    CHECK(y.data()[1] == doctest::Approx(0.0));
    CHECK(y.data()[2] == doctest::Approx(3.0));

    Tensor a0({1}, {0.f});
    Tensor y0 = op::prelu(x, a0);
    CHECK(y0.data()[0] == 0.f);  // ReLU behavior
    CHECK(y0.data()[2] == 3.f);
    tape::clear();
}

TEST_CASE("prelu: gradient w.r.t. alpha on negative inputs") {
    Rng rng(8);
    Tensor x = random_tensor({2, 3, 4, 4}, rng, -2.f, 2.f, true);
    Tensor a = random_tensor({3}, rng, 0.1f, 0.4f, true);
    Tensor t = random_tensor({2, 3, 4, 4}, rng);
    auto fwd = [&] { return op::mse_mean(op::prelu(x, a), t); };
    auto rep = check_gradients(fwd, {x, a}, 1e-3, 1e-3, 1e-4);
    CHECK_MESSAGE(rep.pass, rep.worst);
}

TEST_CASE("sigmoid: symmetry, saturation, gradient identity") {
    Tensor x({3}, {0.f, 50.f, -50.f});
    Tensor y = op::sigmoid(x);
    CHECK(y.data()[0] == doctest::Approx(0.5));
    CHECK(std::fabs(y.data()[1] - 1.f) < 1e-9);
    CHECK(std::fabs(y.data()[2]) < 1e-9);
    for (int i = 0; i < 3; ++i) CHECK(std::isfinite(y.data()[i]));
    tape::clear();

    Rng rng(9);
    Tensor z = random_tensor({16}, rng, -4.f, 4.f, true);
    Tensor s = op::sigmoid(z);
    backward(op::sum_all(s));
    for (int i = 0; i < 16; ++i) {
        const double sv = s.data()[i];
        CHECK(z.grad()[i] == doctest::Approx(sv * (1.0 - sv)).epsilon(1e-6));
    }
}

TEST_CASE("sigmoid: stable out to |x| = 1e3") {
    Tensor x({2}, {1e3f, -1e3f});
    Tensor y = op::sigmoid(x);
    CHECK(y.data()[0] == 1.f);
    CHECK(y.data()[1] == 0.f);
    Tensor sp = op::softplus(x);
    CHECK(std::isfinite(sp.data()[0]));
    CHECK(std::isfinite(sp.data()[1]));
    tape::clear();
}

TEST_CASE("global_avg_pool: means and gradient distribution") {
    Tensor x({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    Tensor y = op::global_avg_pool(x);
    CHECK(y.data()[0] == doctest::Approx(2.5));
    tape::clear();

    Tensor c({2, 3, 4, 4}, 0.f);
    for (int n = 0; n < 2; ++n)
        for (int ch = 0; ch < 3; ++ch)
            for (int i = 0; i < 16; ++i) c.data()[(n * 3 + ch) * 16 + i] = static_cast<float>(ch);
    Tensor yc = op::global_avg_pool(c);
    for (int n = 0; n < 2; ++n)
        for (int ch = 0; ch < 3; ++ch) CHECK(yc.data()[n * 3 + ch] == doctest::Approx(ch));
    tape::clear();

    Rng rng(10);
    Tensor g = random_tensor({2, 2, 3, 3}, rng, -1.f, 1.f, true);
    backward(op::sum_all(op::global_avg_pool(g)));
    for (std::size_t i = 0; i < g.numel(); ++i)
        CHECK(g.grad()[i] == doctest::Approx(1.0 / 9.0).epsilon(1e-6));
}

TEST_CASE("linear: identity, zero weight, gradcheck") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor wid({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor b0({3}, 0.f);
    Tensor y = op::linear(x, wid, b0);
    for (int i = 0; i < 6; ++i) CHECK(y.data()[i] == x.data()[i]);

    Tensor wz({2, 3}, 0.f);
    Tensor b({2}, {7.f, -2.f});
    Tensor yb = op::linear(x, wz, b);
    CHECK(yb.data()[0] == 7.f);
    CHECK(yb.data()[1] == -2.f);
    CHECK(yb.data()[2] == 7.f);
    CHECK(yb.data()[3] == -2.f);
    tape::clear();

    Rng rng(13);
    Tensor xr = random_tensor({3, 5}, rng, -1.f, 1.f, true);
    Tensor wr = random_tensor({4, 5}, rng, -1.f, 1.f, true);
    Tensor br = random_tensor({4}, rng, -1.f, 1.f, true);
    Tensor t = random_tensor({3, 4}, rng);
    auto fwd = [&] { return op::mse_mean(op::linear(xr, wr, br), t); };
    auto rep = check_gradients(fwd, {xr, wr, br}, 1e-3, 1e-3, 1e-4);
    CHECK_MESSAGE(rep.pass, rep.worst);
}

TEST_CASE("pixel_shuffle: identity, definition, round trip") {
    Rng rng(14);
    Tensor x = random_tensor({1, 3, 4, 4}, rng);
    Tensor y1 = op::pixel_shuffle(x, 1);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y1.data()[i] == x.data()[i]);

    Tensor v({1, 4, 1, 1}, {1.f, 2.f, 3.f, 4.f});
    Tensor sv = op::pixel_shuffle(v, 2);
    CHECK(sv.shape() == Shape{1, 1, 2, 2});
    CHECK(sv.data()[0] == 1.f);
    CHECK(sv.data()[1] == 2.f);
    CHECK(sv.data()[2] == 3.f);
    CHECK(sv.data()[3] == 4.f);

    for (int r : {2, 3, 4}) {
        Tensor z = random_tensor({2, 2 * r * r, 3, 5}, rng);
        Tensor rt = op::pixel_unshuffle(op::pixel_shuffle(z, r), r);
        REQUIRE(rt.shape() == z.shape());
        for (std::size_t i = 0; i < z.numel(); ++i) CHECK(rt.data()[i] == z.data()[i]);
    }
    CHECK_THROWS_AS(op::pixel_shuffle(Tensor({1, 3, 2, 2}, 0.f), 2), std::invalid_argument);
    tape::clear();
}

TEST_CASE("elementwise: mse, bce, concat") {
    Rng rng(15);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    CHECK(op::mse_mean(x, x).item() == 0.f);

    Tensor half({4}, 0.5f);
    CHECK(op::bce(half, 1.f).item() == doctest::Approx(0.693147).epsilon(1e-5));

    Tensor a = random_tensor({2, 2, 3, 3}, rng);
    Tensor b = random_tensor({2, 5, 3, 3}, rng);
    Tensor cat = op::concat_channels(a, b);
    CHECK(cat.shape() == Shape{2, 7, 3, 3});
    CHECK(cat.data()[0] == a.data()[0]);
    CHECK(cat.data()[2 * 9] == b.data()[0]);

    CHECK_THROWS_AS(op::add(Tensor({1, 2, 3, 3}, 0.f), Tensor({1, 3, 3, 3}, 0.f)),
                    std::invalid_argument);
    tape::clear();
}

TEST_CASE("broadcast add/mul: per-channel vector and spatial mask") {
    Rng rng(16);
    Tensor x = random_tensor({2, 3, 4, 4}, rng, -1.f, 1.f, true);
    Tensor gamma = random_tensor({2, 3, 1, 1}, rng, -1.f, 1.f, true);
    Tensor mask = random_tensor({2, 1, 4, 4}, rng, 0.f, 1.f, true);
    Tensor t = random_tensor({2, 3, 4, 4}, rng);
    auto fwd = [&] { return op::mse_mean(op::add(op::mul(x, gamma), op::mul(mask, x)), t); };
    auto rep = check_gradients(fwd, {x, gamma, mask}, 1e-3, 1e-3, 1e-4);
    CHECK_MESSAGE(rep.pass, rep.worst);

    // value spot check
    Tensor y = op::mul(x, gamma);
    CHECK(y.data()[17] == doctest::Approx(x.data()[17] * gamma.data()[1]));
    tape::clear();
}

TEST_CASE("backward: sum gives all-ones grads") {
    Rng rng(17);
    Tensor x = random_tensor({3, 2}, rng, -1.f, 1.f, true);
    backward(op::sum_all(x));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 1.f);
}

TEST_CASE("backward: non-scalar loss and double-backward are errors") {
    Rng rng(18);
    Tensor x = random_tensor({2, 2}, rng, -1.f, 1.f, true);
    Tensor y = op::scale(x, 2.f);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
    Tensor l = op::sum_all(y);
    backward(l);
    CHECK_THROWS_AS(backward(l), std::runtime_error);
}

TEST_CASE("backward: conv + mse composite matches finite differences") {
    Rng rng(19);
    Tensor x = random_tensor({1, 2, 6, 6}, rng, -1.f, 1.f, true);
    Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5f, 0.5f, true);
    Tensor t = random_tensor({1, 3, 6, 6}, rng);
    auto fwd = [&] { return op::mse_mean(op::conv2d(x, w, Tensor(), 1, 1), t); };
    auto rep = check_gradients(fwd, {x, w});
    CHECK_MESSAGE(rep.pass, rep.worst);
}

TEST_CASE("gradient suite: remaining differentiable ops on random shapes") {
    Rng rng(20);
    for (int trial = 0; trial < 3; ++trial) {
        const int N = 1 + rng.uniform_int(2);
        const int C = 1 + rng.uniform_int(3);
        const int H = 4 + 2 * rng.uniform_int(3);
        const int W = 4 + 2 * rng.uniform_int(3);
        Tensor x = random_tensor({N, C, H, W}, rng, -1.5f, 1.5f, true);
        Tensor t4 = random_tensor({N, C, H, W}, rng);

        auto check = [&](const char* name, const std::function<Tensor()>& fwd,
                         std::vector<Tensor> params) {
            auto rep = check_gradients(fwd, params, 1e-2, 1e-3, 1e-4);
            CHECK_MESSAGE(rep.pass, std::string(name) << " trial " << trial << ": " << rep.worst);
        };
        // keep the kinked activation away from its non-differentiable point
        Tensor xk = random_tensor({N, C, H, W}, rng, -1.5f, 1.5f, true);
        for (std::size_t i = 0; i < xk.numel(); ++i)
            xk.data()[i] += xk.data()[i] >= 0.f ? 0.2f : -0.2f;
        check("sigmoid", [&] { return op::mse_mean(op::sigmoid(x), t4); }, {x});
        check("leaky_relu", [&] { return op::mse_mean(op::leaky_relu(xk, 0.2f), t4); }, {xk});
        check("softplus", [&] { return op::mse_mean(op::softplus(x), t4); }, {x});
        check("mean_all", [&] { return op::mean_all(op::mul(x, x)); }, {x});
        check("avg_pool2",
              [&] { return op::mean_all(op::avg_pool2(x)); }, {x});
        check("resize_bilinear",
              [&] { return op::mse_mean(op::resize_bilinear(x, H + 3, W + 2),
                                        Tensor({N, C, H + 3, W + 2}, 0.25f)); },
              {x});
        check("pixel_unshuffle",
              [&] {
                  Tensor u = op::pixel_unshuffle(x, 2);
                  return op::mse_mean(u, Tensor(u.shape(), 0.1f));
              },
              {x});
        check("slice+concat",
              [&] {
                  Tensor s = op::slice_axis1(x, 0, C);
                  return op::mse_mean(op::concat_channels(s, x),
                                      Tensor({N, 2 * C, H, W}, 0.1f));
              },
              {x});
        Tensor p = random_tensor({8}, rng, 0.15f, 0.85f, true);
        {
            auto rep = check_gradients([&] { return op::bce(p, 0.7f); }, {p}, 1e-3, 1e-3, 1e-4);
            CHECK_MESSAGE(rep.pass, "bce trial " << trial << ": " << rep.worst);
        }
        Tensor xp = random_tensor({6}, rng, 0.1f, 3.f, true);
        check("log", [&] { return op::sum_all(op::log(xp)); }, {xp});
    }
}

TEST_CASE("no NaN/Inf for large-magnitude inputs") {
    Rng rng(21);
    Tensor x = random_tensor({1, 2, 6, 6}, rng, -1e3f, 1e3f);
    for (Tensor y : {op::sigmoid(x), op::softplus(x), op::leaky_relu(x, 0.2f),
                     op::avg_pool2(x), op::resize_bilinear(x, 9, 9), op::scale(x, 0.5f)}) {
        CHECK_NOTHROW(y.check_finite("op output"));
    }
    BnState st(2);
    CHECK_NOTHROW(op::batch_norm(x, st, true).check_finite("bn output"));
    tape::clear();
}
