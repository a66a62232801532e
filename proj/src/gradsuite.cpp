#include "edgesr/gradsuite.hpp"

#include <stdexcept>

#include "edgesr/network.hpp"
#include "edgesr/objective.hpp"
#include "edgesr/ops.hpp"
#include "edgesr/rng.hpp"

namespace edgesr {
namespace gradsuite {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, float lo, float hi, bool requires_grad) {
    Tensor t(std::move(shape), 0.f, requires_grad);
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// values pushed away from zero so PReLU/LeakyReLU kinks cannot straddle the
// finite-difference interval
Tensor random_off_kink(Shape shape, Rng& rng, bool requires_grad) {
    Tensor t(std::move(shape), 0.f, requires_grad);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const float v = rng.uniform(0.2f, 1.f);
        t.data()[i] = rng.next_double() < 0.5 ? -v : v;
    }
    return t;
}

// Continuous stand-in for an edge map. Binary {0,1} inputs hitting
// zero-initialized biases would park PReLU pre-activations exactly on the
// kink, where finite differences straddle both slopes.
Tensor random_edge(Shape shape, Rng& rng) {
    Tensor t(std::move(shape), 0.f);
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(0.f, 1.f);
    return t;
}

// Zero-initialized parameters (biases, the FiLM projection) sit on activation
// kinks and kill whole gradient paths; nudge everything off zero first. The
// batch-norm running statistics get the same treatment so that eval-mode
// normalization is a non-trivial affine map.
void jitter_params(ParamStore& store, Rng& rng, float amp = 0.05f) {
    for (auto& [name, t] : store.entries()) {
        if (t.requires_grad()) {
            for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] += rng.uniform(-amp, amp);
        } else if (name.size() >= 12 && name.compare(name.size() - 12, 12, "running_mean") == 0) {
            for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-0.2f, 0.2f);
        } else if (name.size() >= 11 && name.compare(name.size() - 11, 11, "running_var") == 0) {
            for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(0.5f, 1.5f);
        }
    }
}

void check_ops(std::vector<Entry>& out, std::uint64_t seed) {
    Rng rng(seed);
    {
        Tensor x = random_tensor({2, 3, 6, 6}, rng, -1.f, 1.f, true);
        Tensor w = random_tensor({4, 3, 3, 3}, rng, -0.5f, 0.5f, true);
        Tensor b = random_tensor({4}, rng, -0.5f, 0.5f, true);
        Tensor target = random_tensor({2, 4, 6, 6}, rng, -1.f, 1.f, false);
        out.push_back({"ops.conv2d(seed " + std::to_string(seed) + ")",
                       check_gradients(
                           [&] { return ops::mse_mean(ops::conv2d(x, w, b, 1, 1), target); },
                           {x, w, b})});
    }
    {
        Tensor x = random_tensor({2, 3, 4, 4}, rng, -1.f, 1.f, true);
        BnState state(3);
        Tensor target = random_tensor({2, 3, 4, 4}, rng, -1.f, 1.f, false);
        out.push_back({"ops.batch_norm(seed " + std::to_string(seed) + ")",
                       check_gradients(
                           [&] {
                               return ops::mse_mean(ops::batch_norm(x, state, true), target);
                           },
                           {x})});
    }
    {
        Tensor x = random_tensor({2, 3, 4, 4}, rng, -1.f, 1.f, true);
        BnState state(3);
        for (std::size_t c = 0; c < 3; ++c) {
            state.running_mean.data()[c] = rng.uniform(-0.2f, 0.2f);
            state.running_var.data()[c] = rng.uniform(0.5f, 1.5f);
        }
        Tensor target = random_tensor({2, 3, 4, 4}, rng, -1.f, 1.f, false);
        out.push_back({"ops.batch_norm_eval(seed " + std::to_string(seed) + ")",
                       check_gradients(
                           [&] {
                               return ops::mse_mean(ops::batch_norm(x, state, false), target);
                           },
                           {x})});
    }
    {
        Tensor x = random_off_kink({2, 3, 4, 4}, rng, true);
        Tensor alpha = random_tensor({3}, rng, 0.1f, 0.5f, true);
        Tensor target = random_tensor({2, 3, 4, 4}, rng, -1.f, 1.f, false);
        out.push_back({"ops.prelu(seed " + std::to_string(seed) + ")",
                       check_gradients(
                           [&] { return ops::mse_mean(ops::prelu(x, alpha), target); },
                           {x, alpha})});
    }
    {
        Tensor x = random_tensor({2, 5}, rng, -1.f, 1.f, true);
        Tensor w = random_tensor({3, 5}, rng, -0.5f, 0.5f, true);
        Tensor b = random_tensor({3}, rng, -0.5f, 0.5f, true);
        Tensor target = random_tensor({2, 3}, rng, 0.f, 1.f, false);
        out.push_back({"ops.linear_sigmoid(seed " + std::to_string(seed) + ")",
                       check_gradients(
                           [&] {
                               return ops::mse_mean(ops::sigmoid(ops::linear(x, w, b)), target);
                           },
                           {x, w, b})});
    }
    {
        Tensor x = random_tensor({1, 8, 4, 4}, rng, -1.f, 1.f, true);
        Tensor target = random_tensor({1, 2, 6, 6}, rng, -1.f, 1.f, false);
        out.push_back({"ops.shuffle_bilinear(seed " + std::to_string(seed) + ")",
                       check_gradients(
                           [&] {
                               return ops::mse_mean(
                                   ops::resize_bilinear(ops::pixel_shuffle(x, 2), 6, 6), target);
                           },
                           {x})});
    }
}

void check_nea(std::vector<Entry>& out, std::uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    Rng init(seed * 7919 + 1);
    EdgeEncoder enc(store, "enc", 3, init);
    NeaBlock nea(store, "nea", 4, 3, init);
    jitter_params(store, init);
    Tensor x = random_tensor({1, 4, 6, 6}, rng, -1.f, 1.f, true);
    Tensor e = random_edge({1, 1, 6, 6}, rng);
    Tensor target = random_tensor({1, 4, 6, 6}, rng, -1.f, 1.f, false);
    std::vector<Tensor> params = store.trainable();
    params.push_back(x);
    out.push_back({"nea(seed " + std::to_string(seed) + ")",
                   check_gradients_mse([&] { return nea.forward(x, enc.forward(e), false); },
                                       target, params, 0, seed, 1e-2, 1e-2, 2e-4)});
}

void check_hybrid(std::vector<Entry>& out, std::uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    Rng init(seed * 7919 + 2);
    EdgeEncoder enc(store, "enc", 3, init);
    HybridEdgeResBlock block(store, "block", 4, 3, true, init);
    jitter_params(store, init);
    Tensor x = random_tensor({1, 4, 6, 6}, rng, -1.f, 1.f, true);
    Tensor e = random_edge({1, 1, 6, 6}, rng);
    Tensor target = random_tensor({1, 4, 6, 6}, rng, -1.f, 1.f, false);
    std::vector<Tensor> params = store.trainable();
    params.push_back(x);
    out.push_back({"hybrid(seed " + std::to_string(seed) + ")",
                   check_gradients_mse([&] { return block.forward(x, enc.forward(e), false); },
                                       target, params, 48, seed, 1e-2, 1e-2, 2e-4)});
}

void check_generator(std::vector<Entry>& out, std::uint64_t seed) {
    Rng rng(seed);
    GeneratorConfig gc{/*scale=*/2, /*blocks=*/1, /*channels=*/8, /*edge_channels=*/4, true};
    Generator gen(gc, seed * 7919 + 3);
    Rng init(seed * 7919 + 30);
    jitter_params(gen.params(), init);
    Tensor lr = random_tensor({1, 3, 8, 8}, rng, 0.f, 1.f, false);
    Tensor edge = random_edge({1, 1, 8, 8}, rng);
    Tensor target = random_tensor({1, 3, 16, 16}, rng, 0.f, 1.f, false);
    out.push_back({"generator(seed " + std::to_string(seed) + ")",
                   check_gradients_mse([&] { return gen.forward(lr, edge, false); }, target,
                                       gen.params().trainable(), 24, seed, 1e-2, 1e-2, 2e-4)});
}

void check_discriminator(std::vector<Entry>& out, std::uint64_t seed) {
    Rng rng(seed);
    DiscriminatorConfig dc{/*base_channels=*/4, /*stages=*/2};
    Discriminator disc(dc, seed * 7919 + 4);
    Rng init(seed * 7919 + 40);
    jitter_params(disc.params(), init);
    Tensor img = random_tensor({2, 3, 8, 8}, rng, 0.f, 1.f, false);
    Tensor target = random_tensor({2, 1}, rng, -0.5f, 0.5f, false);
    out.push_back({"discriminator(seed " + std::to_string(seed) + ")",
                   check_gradients_mse([&] { return disc.forward(img, false); }, target,
                                       disc.params().trainable(), 24, seed, 1e-2, 1e-2, 2e-4)});
}

void check_loss(std::vector<Entry>& out, std::uint64_t seed) {
    Rng rng(seed);
    FeatureExtractor feat(seed * 7919 + 5);
    Tensor sr = random_tensor({1, 3, 16, 16}, rng, 0.1f, 0.9f, true);
    Tensor hr = random_tensor({1, 3, 16, 16}, rng, 0.1f, 0.9f, false);
    Tensor logits = random_tensor({2, 1}, rng, -2.f, 2.f, true);
    // pixel + adversarial terms are smooth, so every element can be checked
    // tightly; the kinked perceptual path gets its own check below.
    LossWeights w{1.f, 0.f, 1.f};
    out.push_back({"loss.pixel_adv(seed " + std::to_string(seed) + ")",
                   check_gradients(
                       [&] {
                           Tensor l_pix = objective::pixel_loss(sr, hr);
                           Tensor l_adv = objective::adversarial_loss_generator(logits);
                           return objective::total_loss(w, l_pix, Tensor(), l_adv);
                       },
                       {sr, logits}, /*h=*/1e-2, /*rel_tol=*/1e-3, /*abs_tol=*/1e-5)});
    Tensor feat_hr;
    {
        NoGradGuard ng;
        feat_hr = feat.forward(hr);
    }
    out.push_back({"loss.perceptual(seed " + std::to_string(seed) + ")",
                   check_gradients_mse([&] { return feat.forward(sr); }, feat_hr, {sr}, 0, seed,
                                       /*h=*/1e-3, /*rel_tol=*/1e-2, /*abs_tol=*/2e-4)});
}

}  // namespace

std::vector<std::string> modules() {
    return {"ops", "nea", "hybrid", "generator", "discriminator", "loss"};
}

std::vector<Entry> run(const std::string& module, int seeds) {
    bool known = module.empty();
    for (const std::string& m : modules())
        if (m == module) known = true;
    if (!known) throw std::invalid_argument("gradcheck: unknown module '" + module + "'");

    std::vector<Entry> out;
    for (int s = 1; s <= seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        if (module.empty() || module == "ops") check_ops(out, seed);
        if (module.empty() || module == "nea") check_nea(out, seed);
        if (module.empty() || module == "hybrid") check_hybrid(out, seed);
        if (module.empty() || module == "generator") check_generator(out, seed);
        if (module.empty() || module == "discriminator") check_discriminator(out, seed);
        if (module.empty() || module == "loss") check_loss(out, seed);
    }
    return out;
}

}  // namespace gradsuite
}  // namespace edgesr
