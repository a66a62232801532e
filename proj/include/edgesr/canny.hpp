#pragma once

#include <vector>

#include "edgesr/image.hpp"
#include "edgesr/tensor.hpp"

namespace edgesr {

// Binary edge map, values in {0,1}, stored as floats for network use.
struct EdgeMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    EdgeMap() = default;
    EdgeMap(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0.f) {}
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct GradientField {
    int height = 0;
    int width = 0;
    std::vector<float> gx, gy, magnitude, direction;  // direction = atan2(gy, gx)
};

struct CannyParams {
    float sigma = 1.0f;
    int ksize = 5;
    // Thresholds are fractions of the max gradient magnitude when relative
    // (the default); absolute values otherwise.
    float low = 0.1f;
    float high = 0.2f;
    bool relative = true;
};

namespace canny {

// Separate stages (grayscale maps are row-major height*width, values [0,255]).
std::vector<float> gaussian_smooth(const std::vector<float>& img, int height, int width,
                                   float sigma, int ksize);
GradientField sobel_gradients(const std::vector<float>& img, int height, int width);
std::vector<float> non_max_suppression(const GradientField& g);
EdgeMap hysteresis(const std::vector<float>& mag, int height, int width, float low, float high);

// Full pipeline: grayscale -> smooth -> gradients -> NMS -> hysteresis.
EdgeMap detect(const Image& img, const CannyParams& params = {});

Tensor to_tensor(const EdgeMap& e);            // [1,1,H,W]
Image to_image(const EdgeMap& e);              // 0/255 visualization

}  // namespace canny
}  // namespace edgesr
