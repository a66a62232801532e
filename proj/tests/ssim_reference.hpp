#pragma once

#include <cmath>

#include "edgesr/image.hpp"

namespace edgesr::testing {

// Naive double-loop SSIM reference: recomputes the Gaussian weights inside
// every window, no precomputation shared with the library.
inline double ref_ssim(const Image& a, const Image& b) {
    const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
    const int r = 5;
    double channel_sum = 0;
    for (int c = 0; c < 3; ++c) {
        double acc = 0;
        int count = 0;
        for (int y = r; y < a.height - r; ++y)
            for (int x = r; x < a.width - r; ++x) {
                double wsum = 0, mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int j = -r; j <= r; ++j)
                    for (int i = -r; i <= r; ++i) {
                        const double w = std::exp(-(i * i + j * j) / (2.0 * 1.5 * 1.5));
                        wsum += w;
                        mx += w * a.at(y + j, x + i, c);
                        my += w * b.at(y + j, x + i, c);
                        mxx += w * a.at(y + j, x + i, c) * a.at(y + j, x + i, c);
                        myy += w * b.at(y + j, x + i, c) * b.at(y + j, x + i, c);
                        mxy += w * a.at(y + j, x + i, c) * b.at(y + j, x + i, c);
                    }
                mx /= wsum;
                my /= wsum;
                mxx /= wsum;
                myy /= wsum;
                mxy /= wsum;
                const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        channel_sum += acc / count;
    }
    return channel_sum / 3.0;
}

}  // namespace edgesr::testing
