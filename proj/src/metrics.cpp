#include "edgesr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace edgesr {
namespace metrics {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kL = 255.0;

void require_same_dims(const Image& a, const Image& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                    std::to_string(a.width) + "x" + std::to_string(a.height) +
                                    " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

const std::vector<double>& gaussian_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(kWin * kWin);
        double sum = 0.0;
        const int r = kWin / 2;
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x) {
                const double v = std::exp(-(x * x + y * y) / (2.0 * kSigma * kSigma));
                w[static_cast<std::size_t>(y + r) * kWin + (x + r)] = v;
                sum += v;
            }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
    require_same_dims(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kL * kL / mse);
}

double ssim(const Image& a, const Image& b) {
    require_same_dims(a, b, "ssim");
    if (a.height < kWin || a.width < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double c1 = (kK1 * kL) * (kK1 * kL);
    const double c2 = (kK2 * kL) * (kK2 * kL);
    const std::vector<double>& win = gaussian_window();
    const int r = kWin / 2;
    const int H = a.height, W = a.width;

    double channel_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        std::size_t count = 0;
        for (int y = r; y < H - r; ++y)
            for (int x = r; x < W - r; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int wy = -r; wy <= r; ++wy)
                    for (int wx = -r; wx <= r; ++wx) {
                        const double w = win[static_cast<std::size_t>(wy + r) * kWin + (wx + r)];
                        const double av = a.at(y + wy, x + wx, c);
                        const double bv = b.at(y + wy, x + wx, c);
                        mx += w * av;
                        my += w * bv;
                        mxx += w * av * av;
                        myy += w * bv * bv;
                        mxy += w * av * bv;
                    }
                const double vx = mxx - mx * mx;
                const double vy = myy - my * my;
                const double cov = mxy - mx * my;
                const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
                const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
                acc += num / den;
                ++count;
            }
        channel_sum += acc / static_cast<double>(count);
    }
    return channel_sum / 3.0;
}

MetricReport evaluate_dir(const std::string& sr_dir, const std::string& hr_dir) {
    namespace fs = std::filesystem;
    MetricReport report;
    auto list = [](const std::string& dir) {
        std::map<std::string, fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            const std::string ext = e.path().extension().string();
            if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM")
                files[e.path().filename().string()] = e.path();
        }
        return files;
    };
    const auto sr_files = list(sr_dir);
    const auto hr_files = list(hr_dir);

    double psnr_sum = 0.0, ssim_sum = 0.0;
    int psnr_count = 0;
    for (const auto& [name, sr_path] : sr_files) {
        auto it = hr_files.find(name);
        if (it == hr_files.end()) {
            report.errors.push_back("no reference counterpart for " + name);
            continue;
        }
        try {
            const Image sr = imageio::load_image(sr_path.string());
            const Image hr = imageio::load_image(it->second.string());
            MetricReport::Entry e;
            e.name = name;
            e.psnr_db = psnr(sr, hr);
            e.ssim = ssim(sr, hr);
            if (std::isinf(e.psnr_db)) {
                ++report.psnr_inf_count;
            } else {
                psnr_sum += e.psnr_db;
                ++psnr_count;
            }
            ssim_sum += e.ssim;
            report.per_image.push_back(std::move(e));
        } catch (const std::exception& ex) {
            report.errors.push_back(name + ": " + ex.what());
        }
    }
    for (const auto& [name, path] : hr_files) {
        (void)path;
        if (!sr_files.count(name)) report.errors.push_back("no result counterpart for " + name);
    }
    if (psnr_count > 0) report.mean_psnr_db = psnr_sum / psnr_count;
    if (!report.per_image.empty())
        report.mean_ssim = ssim_sum / static_cast<double>(report.per_image.size());
    return report;
}

std::string format_report(const MetricReport& r) {
    std::ostringstream os;
    std::size_t name_w = 4;
    for (const auto& e : r.per_image) name_w = std::max(name_w, e.name.size());
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << "name"
       << std::right << std::setw(10) << "psnr_db" << std::setw(10) << "ssim" << "\n";
    for (const auto& e : r.per_image) {
        std::string psnr_str = "inf";
        if (!std::isinf(e.psnr_db)) {
            std::ostringstream ps;
            ps << std::fixed << std::setprecision(4) << e.psnr_db;
            psnr_str = ps.str();
        }
        os << std::left << std::setw(static_cast<int>(name_w) + 2) << e.name << std::right
           << std::setw(10) << psnr_str << std::setw(10) << std::fixed << std::setprecision(4)
           << e.ssim << "\n";
    }
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << "mean" << std::right
       << std::setw(10) << std::fixed << std::setprecision(4) << r.mean_psnr_db << std::setw(10)
       << std::fixed << std::setprecision(4) << r.mean_ssim << "\n";
    if (r.psnr_inf_count > 0)
        os << "(" << r.psnr_inf_count << " identical pair(s) excluded from the PSNR mean)\n";
    for (const auto& e : r.errors) os << "error: " << e << "\n";
    return os.str();
}

void write_csv(const MetricReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "name,psnr_db,ssim\n";
    for (const auto& e : r.per_image) {
        out << e.name << ",";
        if (std::isinf(e.psnr_db))
            out << "inf";
        else
            out << std::setprecision(10) << e.psnr_db;
        out << "," << std::setprecision(10) << e.ssim << "\n";
    }
}

}  // namespace metrics
}  // namespace edgesr
