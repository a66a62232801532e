#include "edgesr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>

namespace edgesr {
namespace imageio {

namespace {

std::uint8_t quantize(float v) {
    const float q = std::floor(v + 0.5f);  // round half up
    return static_cast<std::uint8_t>(std::clamp(q, 0.f, 255.f));
}

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

// ---- PPM (P6, maxval 255) -------------------------------------------------

int read_ppm_token(std::istream& in) {
    // skips whitespace and '#' comments
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    return in ? v : -1;
}

Image load_ppm(std::ifstream& in, const std::string& path) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '6')
        throw std::runtime_error("load_image: " + path + " is not a binary PPM (P6)");
    const int w = read_ppm_token(in);
    const int h = read_ppm_token(in);
    const int maxval = read_ppm_token(in);
    if (w < 1 || h < 1) throw std::runtime_error("load_image: bad PPM dimensions in " + path);
    if (maxval != 255) throw std::runtime_error("load_image: PPM maxval must be 255 in " + path);
    in.get();  // single whitespace after header
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw std::runtime_error("load_image: truncated PPM file " + path);
    Image img(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = static_cast<float>(raw[i]);
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_image: cannot open " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> raw(img.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(img.data[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("save_image: write failed for " + path);
}

// ---- PNG ------------------------------------------------------------------

struct PngReadCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReadCtx() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

Image load_png(const std::string& path) {
    PngReadCtx ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) throw std::runtime_error("load_image: cannot open " + path);
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw std::runtime_error("load_image: libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png)))
        throw std::runtime_error("load_image: corrupt or truncated PNG " + path);
    png_init_io(ctx.png, ctx.fp);
    png_read_info(ctx.png, ctx.info);

    const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
    const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
    const int color = png_get_color_type(ctx.png, ctx.info);
    const int depth = png_get_bit_depth(ctx.png, ctx.info);

    if (depth == 16) png_set_strip_16(ctx.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    Image img(static_cast<int>(h), static_cast<int>(w));
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(ctx.png, row.data(), nullptr);
        for (std::size_t i = 0; i < row.size(); ++i)
            img.data[static_cast<std::size_t>(y) * w * 3 + i] = static_cast<float>(row[i]);
    }
    png_read_end(ctx.png, nullptr);
    return img;
}

struct PngWriteCtx {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriteCtx() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void save_png(const Image& img, const std::string& path) {
    PngWriteCtx ctx;
    ctx.fp = std::fopen(path.c_str(), "wb");
    if (!ctx.fp) throw std::runtime_error("save_image: cannot open " + path);
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw std::runtime_error("save_image: libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw std::runtime_error("save_image: PNG write failed " + path);
    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < row.size(); ++i)
            row[i] = quantize(img.data[static_cast<std::size_t>(y) * img.width * 3 + i]);
        png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
}

}  // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_image: cannot open " + path);
    unsigned char magic[8] = {0};
    in.read(reinterpret_cast<char*>(magic), 8);
    in.seekg(0);
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(magic, png_sig, 8) == 0) {
        in.close();
        return load_png(path);
    }
    if (magic[0] == 'P' && magic[1] == '6') return load_ppm(in, path);
    throw std::runtime_error("load_image: unsupported format in " + path +
                             " (expected PNG or binary PPM P6)");
}

void save_image(const Image& img, const std::string& path) {
    if (img.height < 1 || img.width < 1) throw std::invalid_argument("save_image: empty image");
    if (has_suffix(path, ".png") || has_suffix(path, ".PNG"))
        save_png(img, path);
    else
        save_ppm(img, path);
}

namespace {

// Catmull-Rom kernel taps for fractional position t in [0,1), offsets -1..2.
void catmull_weights(double t, double w[4]) {
    constexpr double a = -0.5;
    const double t2 = t * t, t3 = t2 * t;
    w[0] = a * (t3 - 2 * t2 + t);
    w[1] = (a + 2) * t3 - (a + 3) * t2 + 1;
    w[2] = -(a + 2) * t3 + (2 * a + 3) * t2 - a * t;
    w[3] = a * (t2 - t3);
    const double s = w[0] + w[1] + w[2] + w[3];
    for (int i = 0; i < 4; ++i) w[i] /= s;
}

}  // namespace

Image bicubic_resize(const Image& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bicubic_resize: bad output size");
    if (out_h == img.height && out_w == img.width) return img;

    const int H = img.height, W = img.width;
    // horizontal pass
    std::vector<double> tmp(static_cast<std::size_t>(H) * out_w * 3);
    {
        const double sx = static_cast<double>(W) / out_w;
        std::vector<int> idx(out_w * 4);
        std::vector<double> wts(out_w * 4);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            const int i0 = static_cast<int>(std::floor(fx));
            double w[4];
            catmull_weights(fx - i0, w);
            for (int k = 0; k < 4; ++k) {
                idx[ox * 4 + k] = std::clamp(i0 - 1 + k, 0, W - 1);
                wts[ox * 4 + k] = w[k];
            }
        }
        for (int y = 0; y < H; ++y)
            for (int ox = 0; ox < out_w; ++ox)
                for (int c = 0; c < 3; ++c) {
                    double s = 0.0;
                    for (int k = 0; k < 4; ++k)
                        s += wts[ox * 4 + k] * img.at(y, idx[ox * 4 + k], c);
                    tmp[(static_cast<std::size_t>(y) * out_w + ox) * 3 + c] = s;
                }
    }
    // vertical pass
    Image out(out_h, out_w);
    {
        const double sy = static_cast<double>(H) / out_h;
        for (int oy = 0; oy < out_h; ++oy) {
            const double fy = (oy + 0.5) * sy - 0.5;
            const int i0 = static_cast<int>(std::floor(fy));
            double w[4];
            catmull_weights(fy - i0, w);
            int ys[4];
            for (int k = 0; k < 4; ++k) ys[k] = std::clamp(i0 - 1 + k, 0, H - 1);
            for (int ox = 0; ox < out_w; ++ox)
                for (int c = 0; c < 3; ++c) {
                    double s = 0.0;
                    for (int k = 0; k < 4; ++k)
                        s += w[k] * tmp[(static_cast<std::size_t>(ys[k]) * out_w + ox) * 3 + c];
                    out.at(oy, ox, c) = static_cast<float>(std::clamp(s, 0.0, 255.0));
                }
        }
    }
    return out;
}

std::vector<PatchPair> sample_patch_pairs(const std::vector<Image>& hr_images, int scale,
                                          int patch_lr, int count, Rng& rng) {
    if (scale < 2 || scale > 4) throw std::invalid_argument("sample_patch_pairs: scale must be 2..4");
    const int ph = patch_lr * scale;
    std::vector<int> usable;
    for (std::size_t i = 0; i < hr_images.size(); ++i) {
        if (hr_images[i].height >= ph && hr_images[i].width >= ph) {
            usable.push_back(static_cast<int>(i));
        } else {
            std::cerr << "sample_patch_pairs: skipping image #" << i << " ("
                      << hr_images[i].width << "x" << hr_images[i].height
                      << "), smaller than " << ph << "x" << ph << "\n";
        }
    }
    if (usable.empty())
        throw std::runtime_error("sample_patch_pairs: no image large enough for " +
                                 std::to_string(ph) + "x" + std::to_string(ph) + " HR crops");

    std::vector<PatchPair> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const Image& hr = hr_images[static_cast<std::size_t>(
            usable[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(usable.size())))])];
        const int y0 = rng.uniform_int(hr.height - ph + 1);
        const int x0 = rng.uniform_int(hr.width - ph + 1);
        PatchPair pp;
        pp.scale = scale;
        pp.hr = Image(ph, ph);
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < ph; ++x)
                for (int c = 0; c < 3; ++c) pp.hr.at(y, x, c) = hr.at(y0 + y, x0 + x, c);
        pp.lr = bicubic_resize(pp.hr, patch_lr, patch_lr);
        out.push_back(std::move(pp));
    }
    return out;
}

Tensor to_tensor(const Image& img) {
    Tensor t({1, 3, img.height, img.width}, 0.f);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                t.data()[c * plane + static_cast<std::size_t>(y) * img.width + x] =
                    img.at(y, x, c) / 255.f;
    return t;
}

Image from_tensor(const Tensor& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 3)
        throw std::invalid_argument("from_tensor: expected [1,3,H,W], got " + shape_str(t.shape()));
    const int H = t.dim(2), W = t.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Image img(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(t.data()[c * plane + static_cast<std::size_t>(y) * W + x],
                                           0.f, 1.f) * 255.f;
                img.at(y, x, c) = std::floor(v + 0.5f);  // round half up
            }
    return img;
}

std::vector<float> to_grayscale(const Image& img) {
    std::vector<float> g(static_cast<std::size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            g[static_cast<std::size_t>(y) * img.width + x] =
                0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
    return g;
}

}  // namespace imageio
}  // namespace edgesr
