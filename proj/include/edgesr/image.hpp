#pragma once

#include <string>
#include <vector>

#include "edgesr/rng.hpp"
#include "edgesr/tensor.hpp"

namespace edgesr {

// RGB image, interleaved, values in [0,255] stored as floats.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height*width*3

    Image() = default;
    Image(int h, int w, float fill = 0.f)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// Aligned LR/HR training crop. hr side = lr side * scale.
struct PatchPair {
    Image lr;
    Image hr;
    int scale = 0;
};

namespace imageio {

// PNG or binary PPM (P6, maxval 255), chosen by file content on read and by
// extension on write (.png -> PNG, anything else -> PPM).
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

// Catmull-Rom bicubic (a = -0.5), edge-clamped, output clipped to [0,255].
Image bicubic_resize(const Image& img, int out_h, int out_w);

// Random aligned patch pairs; LR is the bicubic downscale of the HR crop.
// HR images smaller than patch_lr*scale per side are skipped with a warning
// on stderr; no usable image at all is an error.
std::vector<PatchPair> sample_patch_pairs(const std::vector<Image>& hr_images, int scale,
                                          int patch_lr, int count, Rng& rng);

Tensor to_tensor(const Image& img);       // [1,3,H,W] in [0,1]
Image from_tensor(const Tensor& t);       // clips, maps back to [0,255]

// grayscale helpers shared with canny (ITU-R 601 luma)
std::vector<float> to_grayscale(const Image& img);  // height*width, [0,255]

}  // namespace imageio
}  // namespace edgesr
