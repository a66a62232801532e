#include "edgesr/canny.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace edgesr {
namespace canny {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

std::vector<float> gaussian_smooth(const std::vector<float>& img, int height, int width,
                                   float sigma, int ksize) {
    if (ksize % 2 == 0) throw std::invalid_argument("gaussian_smooth: ksize must be odd");
    if (sigma <= 0.f) throw std::invalid_argument("gaussian_smooth: sigma must be > 0");
    const int r = ksize / 2;
    std::vector<double> kernel(static_cast<std::size_t>(ksize) * ksize);
    double ksum = 0.0;
    for (int ky = -r; ky <= r; ++ky)
        for (int kx = -r; kx <= r; ++kx) {
            const double v = std::exp(-(ky * ky + kx * kx) / (2.0 * sigma * sigma));
            kernel[static_cast<std::size_t>(ky + r) * ksize + (kx + r)] = v;
            ksum += v;
        }
    for (double& v : kernel) v /= ksum;

    std::vector<float> out(img.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int ky = -r; ky <= r; ++ky)
                for (int kx = -r; kx <= r; ++kx) {
                    const int sy = clampi(y + ky, 0, height - 1);
                    const int sx = clampi(x + kx, 0, width - 1);
                    acc += kernel[static_cast<std::size_t>(ky + r) * ksize + (kx + r)] *
                           img[static_cast<std::size_t>(sy) * width + sx];
                }
            out[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc);
        }
    return out;
}

GradientField sobel_gradients(const std::vector<float>& img, int height, int width) {
    if (height < 3 || width < 3)
        throw std::invalid_argument("sobel_gradients: image must be at least 3x3");
    static const int KX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static const int KY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    GradientField g;
    g.height = height;
    g.width = width;
    g.gx.resize(img.size());
    g.gy.resize(img.size());
    g.magnitude.resize(img.size());
    g.direction.resize(img.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double ax = 0.0, ay = 0.0;
            for (int ky = -1; ky <= 1; ++ky)
                for (int kx = -1; kx <= 1; ++kx) {
                    const float v = img[static_cast<std::size_t>(clampi(y + ky, 0, height - 1)) * width +
                                        clampi(x + kx, 0, width - 1)];
                    ax += KX[ky + 1][kx + 1] * static_cast<double>(v);
                    ay += KY[ky + 1][kx + 1] * static_cast<double>(v);
                }
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            g.gx[i] = static_cast<float>(ax);
            g.gy[i] = static_cast<float>(ay);
            g.magnitude[i] = static_cast<float>(std::sqrt(ax * ax + ay * ay));
            // atan2(gy, gx); the standard convention, not the reciprocal
            g.direction[i] = static_cast<float>(std::atan2(ay, ax));
        }
    return g;
}

std::vector<float> non_max_suppression(const GradientField& g) {
    const int H = g.height, W = g.width;
    std::vector<float> out(g.magnitude.size(), 0.f);
    for (int y = 1; y < H - 1; ++y)
        for (int x = 1; x < W - 1; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            const float m = g.magnitude[i];
            if (m == 0.f) continue;
            // fold direction into [0, 180) and quantize to 4 bins
            float deg = g.direction[i] * 180.f / 3.14159265358979323846f;
            if (deg < 0.f) deg += 180.f;
            int dy1, dx1;
            if (deg < 22.5f || deg >= 157.5f) {
                dy1 = 0;
                dx1 = 1;  // 0 deg: horizontal gradient
            } else if (deg < 67.5f) {
                dy1 = 1;
                dx1 = 1;  // 45 deg
            } else if (deg < 112.5f) {
                dy1 = 1;
                dx1 = 0;  // 90 deg: vertical gradient
            } else {
                dy1 = 1;
                dx1 = -1;  // 135 deg
            }
            const float n1 = g.magnitude[static_cast<std::size_t>(y + dy1) * W + (x + dx1)];
            const float n2 = g.magnitude[static_cast<std::size_t>(y - dy1) * W + (x - dx1)];
            // ties keep (>=): plateau interiors survive and thin in hysteresis
            if (m >= n1 && m >= n2) out[i] = m;
        }
    return out;
}

EdgeMap hysteresis(const std::vector<float>& mag, int height, int width, float low, float high) {
    if (low < 0.f || low >= high)
        throw std::invalid_argument("hysteresis: need 0 <= low < high");
    EdgeMap em(height, width);
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (mag[static_cast<std::size_t>(y) * width + x] >= high) {
                em.data[static_cast<std::size_t>(y) * width + x] = 1.f;
                queue.emplace_back(y, x);
            }
    while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
                const std::size_t i = static_cast<std::size_t>(ny) * width + nx;
                if (em.data[i] == 0.f && mag[i] >= low) {
                    em.data[i] = 1.f;
                    queue.emplace_back(ny, nx);
                }
            }
    }
    return em;
}

EdgeMap detect(const Image& img, const CannyParams& params) {
    const std::vector<float> gray = imageio::to_grayscale(img);
    const std::vector<float> smooth =
        gaussian_smooth(gray, img.height, img.width, params.sigma, params.ksize);
    const GradientField g = sobel_gradients(smooth, img.height, img.width);
    const std::vector<float> nms = non_max_suppression(g);
    float low = params.low, high = params.high;
    if (params.relative) {
        float max_m = 0.f;
        for (float m : g.magnitude) max_m = std::max(max_m, m);
        if (max_m <= 0.f) return EdgeMap(img.height, img.width);  // flat image
        low *= max_m;
        high *= max_m;
    }
    return hysteresis(nms, img.height, img.width, low, high);
}

Tensor to_tensor(const EdgeMap& e) {
    Tensor t({1, 1, e.height, e.width}, 0.f);
    std::copy(e.data.begin(), e.data.end(), t.data());
    return t;
}

Image to_image(const EdgeMap& e) {
    Image img(e.height, e.width);
    for (int y = 0; y < e.height; ++y)
        for (int x = 0; x < e.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = e.at(y, x) * 255.f;
    return img;
}

}  // namespace canny
}  // namespace edgesr
