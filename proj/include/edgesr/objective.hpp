#pragma once

#include <cstdint>
#include <vector>

#include "edgesr/ops.hpp"
#include "edgesr/tensor.hpp"

namespace edgesr {

struct LossWeights {
    float w_pixel = 1.f;
    float w_perceptual = 0.f;
    float w_adversarial = 0.f;
};

// Stand-in for a pretrained perceptual backbone: a fixed random conv stack,
// drawn once from a seed and frozen. Four stages of conv3x3 + ReLU + 2x
// average pooling, channels 3 -> 16 -> 32 -> 64 -> 64.
class FeatureExtractor {
public:
    explicit FeatureExtractor(std::uint64_t seed);

    // x: [N,3,H,W], H and W divisible by 16 after the four poolings is not
    // required (odd trailing rows are dropped by the pool).
    Tensor forward(const Tensor& x) const;

    const std::vector<Tensor>& weights() const { return weights_; }

private:
    std::vector<Tensor> weights_, biases_;
};

namespace objective {

Tensor pixel_loss(const Tensor& sr, const Tensor& hr);
Tensor perceptual_loss(const FeatureExtractor& extractor, const Tensor& sr, const Tensor& hr);

// Non-saturating generator objective: -(1/N) sum log sigmoid(logit),
// evaluated as mean softplus(-logit).
Tensor adversarial_loss_generator(const Tensor& d_logits_on_sr);

// BCE with target 1 for real logits and 0 for fake, averaged over both halves.
Tensor adversarial_loss_discriminator(const Tensor& logits_real, const Tensor& logits_fake);

Tensor total_loss(const LossWeights& w, const Tensor& l_pix, const Tensor& l_perc,
                  const Tensor& l_adv);

}  // namespace objective
}  // namespace edgesr
