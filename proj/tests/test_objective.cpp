#include <cmath>

#include "doctest.h"
#include "edgesr/objective.hpp"
#include "edgesr/rng.hpp"
#include "helpers.hpp"

using namespace edgesr;
using edgesr::testing::random_tensor;

TEST_CASE("pixel loss: zero on identical inputs, d^2 on a constant offset") {
    Rng rng(1);
    Tensor sr = random_tensor({2, 3, 8, 8}, rng, 0.f, 1.f);
    CHECK(objective::pixel_loss(sr, sr).item() == 0.f);

    Tensor hr(sr.shape(), 0.f);
    for (std::size_t i = 0; i < sr.numel(); ++i) hr.data()[i] = sr.data()[i] + 0.1f;
    CHECK(objective::pixel_loss(sr, hr).item() == doctest::Approx(0.01).epsilon(1e-5));
}

TEST_CASE("pixel loss: gradient is 2(sr - hr)/N") {
    Rng rng(2);
    Tensor sr = random_tensor({1, 3, 6, 6}, rng, 0.f, 1.f, /*requires_grad=*/true);
    Tensor hr = random_tensor({1, 3, 6, 6}, rng, 0.f, 1.f);
    tape::clear();
    backward(objective::pixel_loss(sr, hr));
    const float n = static_cast<float>(sr.numel());
    for (std::size_t i = 0; i < sr.numel(); ++i)
        CHECK(sr.grad()[i] ==
              doctest::Approx(2.f * (sr.data()[i] - hr.data()[i]) / n).epsilon(1e-5));
}

TEST_CASE("perceptual loss: symmetric, zero at identity, seed-deterministic") {
    Rng rng(3);
    Tensor a = random_tensor({1, 3, 16, 16}, rng, 0.f, 1.f);
    Tensor b = random_tensor({1, 3, 16, 16}, rng, 0.f, 1.f);

    FeatureExtractor f1(99), f2(99), f3(100);
    CHECK(objective::perceptual_loss(f1, a, a).item() == 0.f);
    CHECK(objective::perceptual_loss(f1, a, b).item() ==
          objective::perceptual_loss(f1, b, a).item());
    CHECK(objective::perceptual_loss(f1, a, b).item() ==
          objective::perceptual_loss(f2, a, b).item());
    CHECK(objective::perceptual_loss(f1, a, b).item() !=
          objective::perceptual_loss(f3, a, b).item());
    CHECK(objective::perceptual_loss(f1, a, b).item() > 0.f);
}

TEST_CASE("perceptual loss: extractor is frozen, sr still receives gradient") {
    Rng rng(4);
    Tensor sr = random_tensor({1, 3, 16, 16}, rng, 0.f, 1.f, /*requires_grad=*/true);
    Tensor hr = random_tensor({1, 3, 16, 16}, rng, 0.f, 1.f);
    FeatureExtractor feat(7);
    tape::clear();
    backward(objective::perceptual_loss(feat, sr, hr));
    CHECK(sr.has_grad());
    float gsum = 0.f;
    for (std::size_t i = 0; i < sr.numel(); ++i) gsum += std::fabs(sr.grad()[i]);
    CHECK(gsum > 0.f);
    for (const Tensor& w : feat.weights()) {
        CHECK_FALSE(w.requires_grad());
        CHECK_FALSE(w.has_grad());
    }
}

TEST_CASE("generator adversarial loss: ln 2 at zero, saturation-safe, matches -log sigmoid") {
    Tensor zero({3, 1}, 0.f);
    CHECK(objective::adversarial_loss_generator(zero).item() ==
          doctest::Approx(0.6931472).epsilon(1e-6));

    Tensor confident({1, 1}, 50.f);
    CHECK(objective::adversarial_loss_generator(confident).item() ==
          doctest::Approx(0.0).epsilon(1e-6));
    Tensor fooled({1, 1}, -50.f);
    const float v = objective::adversarial_loss_generator(fooled).item();
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(50.0).epsilon(1e-6));

    for (float x = -20.f; x <= 20.f; x += 1.25f) {
        Tensor logit({1, 1}, x);
        const double naive = -std::log(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
        CHECK(objective::adversarial_loss_generator(logit).item() ==
              doctest::Approx(naive).epsilon(1e-5));
    }
}

TEST_CASE("discriminator adversarial loss: averaged BCE against 1/0 targets") {
    // hand-evaluated: 0.5 * (softplus(-real) + softplus(fake)) per element
    Tensor real({2, 1}, 0.f);
    real.data()[0] = 1.2f;
    real.data()[1] = -0.4f;
    Tensor fake({2, 1}, 0.f);
    fake.data()[0] = 0.3f;
    fake.data()[1] = -2.0f;
    auto sp = [](double x) { return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0); };
    const double expect =
        0.5 * ((sp(-1.2) + sp(0.4)) / 2.0 + (sp(0.3) + sp(-2.0)) / 2.0);
    CHECK(objective::adversarial_loss_discriminator(real, fake).item() ==
          doctest::Approx(expect).epsilon(1e-5));

    // a perfect discriminator drives the loss to zero, a blind one to ln 2
    Tensor sure_real({1, 1}, 40.f), sure_fake({1, 1}, -40.f), blind({1, 1}, 0.f);
    CHECK(objective::adversarial_loss_discriminator(sure_real, sure_fake).item() ==
          doctest::Approx(0.0).epsilon(1e-6));
    CHECK(objective::adversarial_loss_discriminator(blind, blind).item() ==
          doctest::Approx(0.6931472).epsilon(1e-6));
}

TEST_CASE("total loss: weighted sum, optional terms, negative weights rejected") {
    Tensor one({1}, 1.f), two({1}, 2.f), three({1}, 3.f);

    LossWeights w{1.f, 0.001f, 0.01f};
    CHECK(objective::total_loss(w, one, one, one).item() ==
          doctest::Approx(1.011).epsilon(1e-6));
    CHECK(objective::total_loss(w, one, two, three).item() ==
          doctest::Approx(1.0 + 0.002 + 0.03).epsilon(1e-6));

    LossWeights pixel_only{2.f, 0.f, 0.f};
    CHECK(objective::total_loss(pixel_only, three, Tensor(), Tensor()).item() ==
          doctest::Approx(6.0).epsilon(1e-6));

    LossWeights bad{1.f, -0.1f, 0.f};
    CHECK_THROWS_AS(objective::total_loss(bad, one, one, one), std::invalid_argument);
}

TEST_CASE("total loss: gradient is the weighted sum of the per-term gradients") {
    Rng rng(5);
    Tensor sr = random_tensor({1, 3, 16, 16}, rng, 0.1f, 0.9f, /*requires_grad=*/true);
    Tensor hr = random_tensor({1, 3, 16, 16}, rng, 0.1f, 0.9f);
    FeatureExtractor feat(11);
    LossWeights w{1.f, 0.01f, 0.f};

    tape::clear();
    sr.zero_grad();
    backward(objective::total_loss(w, objective::pixel_loss(sr, hr),
                                   objective::perceptual_loss(feat, sr, hr), Tensor()));
    const std::vector<float> combined = sr.grad();

    tape::clear();
    sr.zero_grad();
    backward(objective::pixel_loss(sr, hr));
    const std::vector<float> g_pix = sr.grad();
    tape::clear();
    sr.zero_grad();
    backward(objective::perceptual_loss(feat, sr, hr));
    const std::vector<float> g_perc = sr.grad();

    for (std::size_t i = 0; i < combined.size(); ++i)
        CHECK(combined[i] ==
              doctest::Approx(1.f * g_pix[i] + 0.01f * g_perc[i]).epsilon(1e-4));
}
