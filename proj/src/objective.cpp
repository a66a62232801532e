#include "edgesr/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "edgesr/rng.hpp"

namespace edgesr {

FeatureExtractor::FeatureExtractor(std::uint64_t seed) {
    Rng rng(seed);
    const int widths[] = {3, 16, 32, 64, 64};
    for (int s = 0; s < 4; ++s) {
        const int cin = widths[s], cout = widths[s + 1];
        const double bound = std::sqrt(6.0 / (cin * 9.0));
        Tensor w({cout, cin, 3, 3}, 0.f);
        for (std::size_t i = 0; i < w.numel(); ++i)
            w.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
        weights_.push_back(w);
        biases_.push_back(Tensor::zeros({cout}));
    }
}

Tensor FeatureExtractor::forward(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != 3)
        throw std::invalid_argument("feature extractor: input must be [N,3,H,W], got " +
                                    shape_str(x.shape()));
    Tensor f = x;
    for (std::size_t s = 0; s < weights_.size(); ++s) {
        f = ops::avg_pool2(ops::relu(ops::conv2d(f, weights_[s], biases_[s], 1, 1)));
    }
    return f;
}

namespace objective {

Tensor pixel_loss(const Tensor& sr, const Tensor& hr) {
    return ops::mse_mean(sr, hr);
}

Tensor perceptual_loss(const FeatureExtractor& extractor, const Tensor& sr, const Tensor& hr) {
    return ops::mse_mean(extractor.forward(sr), extractor.forward(hr));
}

Tensor adversarial_loss_generator(const Tensor& d_logits_on_sr) {
    return ops::mean_all(ops::softplus(ops::neg(d_logits_on_sr)));
}

Tensor adversarial_loss_discriminator(const Tensor& logits_real, const Tensor& logits_fake) {
    Tensor real = ops::mean_all(ops::softplus(ops::neg(logits_real)));
    Tensor fake = ops::mean_all(ops::softplus(logits_fake));
    return ops::scale(ops::add(real, fake), 0.5f);
}

Tensor total_loss(const LossWeights& w, const Tensor& l_pix, const Tensor& l_perc,
                  const Tensor& l_adv) {
    if (w.w_pixel < 0 || w.w_perceptual < 0 || w.w_adversarial < 0)
        throw std::invalid_argument("total_loss: weights must be non-negative");
    Tensor total = ops::scale(l_pix, w.w_pixel);
    if (l_perc.defined() && w.w_perceptual != 0.f)
        total = ops::add(total, ops::scale(l_perc, w.w_perceptual));
    if (l_adv.defined() && w.w_adversarial != 0.f)
        total = ops::add(total, ops::scale(l_adv, w.w_adversarial));
    return total;
}

}  // namespace objective
}  // namespace edgesr
