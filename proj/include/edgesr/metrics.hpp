#pragma once

#include <string>
#include <vector>

#include "edgesr/image.hpp"

namespace edgesr {

struct MetricReport {
    struct Entry {
        std::string name;
        double psnr_db = 0.0;  // +inf for identical images
        double ssim = 0.0;
    };
    std::vector<Entry> per_image;
    double mean_psnr_db = 0.0;  // over finite entries only
    double mean_ssim = 0.0;
    int psnr_inf_count = 0;     // identical pairs excluded from the PSNR mean
    std::vector<std::string> errors;  // unpaired / unreadable files
};

namespace metrics {

// 10*log10(255^2 / MSE), MSE over all RGB channels. +inf when identical.
double psnr(const Image& a, const Image& b);

// Gaussian-windowed SSIM (11x11, sigma 1.5, K1=0.01, K2=0.03, L=255),
// channel-wise in RGB then averaged; valid region only (no padding).
double ssim(const Image& a, const Image& b);

// Pairs files by name across the two directories (PNG/PPM), stable order.
MetricReport evaluate_dir(const std::string& sr_dir, const std::string& hr_dir);

std::string format_report(const MetricReport& r);
void write_csv(const MetricReport& r, const std::string& path);

}  // namespace metrics
}  // namespace edgesr
