#pragma once

#include "edgesr/tensor.hpp"

namespace edgesr {

// Per-channel running statistics for batch_norm. Stored as plain tensors so
// they travel with checkpoints.
struct BnState {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]

    explicit BnState(int channels = 0) {
        if (channels > 0) {
            running_mean = Tensor::zeros({channels});
            running_var = Tensor({channels}, 1.f);
        }
    }
};

namespace ops {

// -- structured ops ---------------------------------------------------------

// Cross-correlation, stride/padding identical on both spatial axes.
// x [N,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout] (optional, pass
// undefined Tensor to skip).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);

// Pure normalization (no affine). Train mode uses batch statistics and
// updates `state`; eval mode uses the running statistics.
Tensor batch_norm(const Tensor& x, BnState& state, bool training,
                  float eps = 1e-5f, float momentum = 0.1f);

// alpha: [C] learnable slope, or [1] shared.
Tensor prelu(const Tensor& x, const Tensor& alpha);
Tensor leaky_relu(const Tensor& x, float slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Hash of the sign pattern of every input a kinked activation (relu,
// leaky_relu, prelu) has seen on this thread since the last reset. A
// finite-difference harness compares the signature at +h and -h: if they
// differ, the loss has a slope break inside the interval and that element
// cannot be checked numerically.
namespace kinkprobe {
void reset();
std::uint64_t signature();
}  // namespace kinkprobe

Tensor global_avg_pool(const Tensor& x);              // [N,C,H,W] -> [N,C]
Tensor avg_pool2(const Tensor& x);                    // 2x2 stride-2 mean
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor pixel_shuffle(const Tensor& x, int r);         // [N,C*r^2,H,W] -> [N,C,rH,rW]
Tensor pixel_unshuffle(const Tensor& x, int r);       // exact inverse
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

// -- elementwise / reshaping ------------------------------------------------

// add/mul broadcast axis extents of 1 against matching extents (after
// right-padding the shorter shape with leading 1s), which covers per-channel
// vectors and [N,1,H,W] masks against [N,C,H,W] maps.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float s);
Tensor add_scalar(const Tensor& x, float s);
Tensor neg(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softplus(const Tensor& x);

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // axis 1
Tensor slice_axis1(const Tensor& x, int start, int count);

// -- reductions / losses ----------------------------------------------------

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mse_mean(const Tensor& a, const Tensor& b);
// -mean(t*log(p) + (1-t)*log(1-p)) with constant scalar target t.
Tensor bce(const Tensor& p, float target);

}  // namespace ops
}  // namespace edgesr
