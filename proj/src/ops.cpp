#include "edgesr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace edgesr {
namespace ops {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

bool track_any(std::initializer_list<const Tensor*> ins) {
    if (!tape::recording()) return false;
    for (const Tensor* t : ins)
        if (t->defined() && t->impl()->on_tape) return true;
    return false;
}

void mark_output(const Tensor& out, bool tracked) { out.impl()->on_tape = tracked; }

bool wants_grad(const ImplPtr& in) { return in->on_tape; }

float stable_sigmoid(float x) {
    if (x >= 0.f) {
        return 1.f / (1.f + std::exp(-x));
    }
    float e = std::exp(x);
    return e / (1.f + e);
}

void require_rank(const Tensor& t, int r, const char* what) {
    if (t.rank() != r)
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(r) +
                                    ", got shape " + shape_str(t.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    require_rank(x, 4, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != Cin)
        throw std::invalid_argument("conv2d: weight input-channel axis is " +
                                    std::to_string(weight.dim(1)) + " but input has " +
                                    std::to_string(Cin) + " channels");
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("conv2d: kernel extents must be odd, got " +
                                    std::to_string(kh) + "x" + std::to_string(kw));
    if (padding < 0 || stride < 1) throw std::invalid_argument("conv2d: bad stride/padding");
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Cout))
        throw std::invalid_argument("conv2d: bias axis must be [Cout]=" + std::to_string(Cout) +
                                    ", got " + shape_str(bias.shape()));
    const int eh = H + 2 * padding - kh;
    const int ew = W + 2 * padding - kw;
    if (eh < 0 || ew < 0)
        throw std::invalid_argument("conv2d: spatial axes " + std::to_string(H) + "x" +
                                    std::to_string(W) + " incompatible with k=" + std::to_string(kh) +
                                    " s=" + std::to_string(stride) + " p=" + std::to_string(padding));
    // floor division: trailing rows/columns that no full stride reaches are dropped
    const int Ho = eh / stride + 1;
    const int Wo = ew / stride + 1;

    Tensor out({N, Cout, Ho, Wo}, 0.f);
    const float* xd = x.data();
    const float* wd = weight.data();
    float* od = out.data();

    const std::size_t x_n = static_cast<std::size_t>(Cin) * H * W;
    const std::size_t o_n = static_cast<std::size_t>(Cout) * Ho * Wo;

    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Cout; ++co) {
            float* oc = od + n * o_n + static_cast<std::size_t>(co) * Ho * Wo;
            if (bias.defined()) {
                const float b = bias.data()[co];
                std::fill(oc, oc + static_cast<std::size_t>(Ho) * Wo, b);
            }
            for (int ci = 0; ci < Cin; ++ci) {
                const float* xc = xd + n * x_n + static_cast<std::size_t>(ci) * H * W;
                const float* wc = wd + ((static_cast<std::size_t>(co) * Cin + ci) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    for (int kx = 0; kx < kw; ++kx) {
                        const float wv = wc[ky * kw + kx];
                        if (wv == 0.f) continue;
                        if (stride == 1) {
                            const int ow_lo = std::max(0, padding - kx);
                            const int ow_hi = std::min(Wo - 1, W - 1 + padding - kx);
                            for (int oh = 0; oh < Ho; ++oh) {
                                const int ih = oh - padding + ky;
                                if (ih < 0 || ih >= H) continue;
                                const float* xrow = xc + static_cast<std::size_t>(ih) * W - padding + kx;
                                float* orow = oc + static_cast<std::size_t>(oh) * Wo;
                                for (int ow = ow_lo; ow <= ow_hi; ++ow)
                                    orow[ow] += wv * xrow[ow];
                            }
                        } else {
                            for (int oh = 0; oh < Ho; ++oh) {
                                const int ih = oh * stride - padding + ky;
                                if (ih < 0 || ih >= H) continue;
                                const float* xrow = xc + static_cast<std::size_t>(ih) * W;
                                float* orow = oc + static_cast<std::size_t>(oh) * Wo;
                                for (int ow = 0; ow < Wo; ++ow) {
                                    const int iw = ow * stride - padding + kx;
                                    if (iw < 0 || iw >= W) continue;
                                    orow[ow] += wv * xrow[iw];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    const bool tracked = track_any({&x, &weight, &bias});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), wi = weight.impl(), oi = out.impl();
        ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
        tape::record([xi, wi, bi, oi, N, Cin, H, W, Cout, kh, kw, Ho, Wo, stride, padding] {
            if (oi->grad.empty()) return;
            const float* g = oi->grad.data();
            const float* xd = xi->data.data();
            const float* wd = wi->data.data();
            const bool need_dx = wants_grad(xi);
            const bool need_dw = wants_grad(wi);
            const bool need_db = bi && wants_grad(bi);
            if (need_dx) xi->ensure_grad();
            if (need_dw) wi->ensure_grad();
            if (need_db) bi->ensure_grad();
            const std::size_t x_n = static_cast<std::size_t>(Cin) * H * W;
            const std::size_t o_n = static_cast<std::size_t>(Cout) * Ho * Wo;
            for (int n = 0; n < N; ++n) {
                for (int co = 0; co < Cout; ++co) {
                    const float* gc = g + n * o_n + static_cast<std::size_t>(co) * Ho * Wo;
                    if (need_db) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < static_cast<std::size_t>(Ho) * Wo; ++i) s += gc[i];
                        bi->grad[co] += static_cast<float>(s);
                    }
                    if (!need_dx && !need_dw) continue;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const float* xc = xd + n * x_n + static_cast<std::size_t>(ci) * H * W;
                        float* dxc = need_dx ? xi->grad.data() + n * x_n + static_cast<std::size_t>(ci) * H * W
                                             : nullptr;
                        const std::size_t wbase = (static_cast<std::size_t>(co) * Cin + ci) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            for (int kx = 0; kx < kw; ++kx) {
                                const float wv = wd[wbase + ky * kw + kx];
                                double dwacc = 0.0;
                                for (int oh = 0; oh < Ho; ++oh) {
                                    const int ih = oh * stride - padding + ky;
                                    if (ih < 0 || ih >= H) continue;
                                    const float* grow = gc + static_cast<std::size_t>(oh) * Wo;
                                    const float* xrow = xc + static_cast<std::size_t>(ih) * W;
                                    float* dxrow = need_dx ? dxc + static_cast<std::size_t>(ih) * W : nullptr;
                                    for (int ow = 0; ow < Wo; ++ow) {
                                        const int iw = ow * stride - padding + kx;
                                        if (iw < 0 || iw >= W) continue;
                                        const float gv = grow[ow];
                                        if (need_dw) dwacc += static_cast<double>(gv) * xrow[iw];
                                        if (need_dx) dxrow[iw] += wv * gv;
                                    }
                                }
                                if (need_dw) wi->grad[wbase + ky * kw + kx] += static_cast<float>(dwacc);
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch_norm

Tensor batch_norm(const Tensor& x, BnState& state, bool training, float eps, float momentum) {
    require_rank(x, 4, "batch_norm input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (state.running_mean.dim(0) != C)
        throw std::invalid_argument("batch_norm: state has " + std::to_string(state.running_mean.dim(0)) +
                                    " channels, input has " + std::to_string(C));
    const std::size_t m = static_cast<std::size_t>(N) * H * W;
    Tensor out({N, C, H, W}, 0.f);
    const float* xd = x.data();
    float* od = out.data();
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t img = static_cast<std::size_t>(C) * plane;

    std::vector<float> invstd(C);
    if (training) {
        if (m < 2)
            throw std::invalid_argument("batch_norm: train mode needs N*H*W >= 2 per channel, got 1");
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = xd + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = xd + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    v += d * d;
                }
            }
            const double var = v / static_cast<double>(m);
            const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
            invstd[c] = is;
            const float muf = static_cast<float>(mu);
            for (int n = 0; n < N; ++n) {
                const float* p = xd + n * img + c * plane;
                float* q = od + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - muf) * is;
            }
            // running stats use the unbiased variance (PyTorch convention)
            const double var_unbiased = v / static_cast<double>(m - 1);
            float& rm = state.running_mean.data()[c];
            float& rv = state.running_var.data()[c];
            rm = (1.f - momentum) * rm + momentum * static_cast<float>(mu);
            rv = (1.f - momentum) * rv + momentum * static_cast<float>(var_unbiased);
        }
    } else {
        for (int c = 0; c < C; ++c) {
            const float mu = state.running_mean.data()[c];
            const float is = 1.f / std::sqrt(state.running_var.data()[c] + eps);
            invstd[c] = is;
            for (int n = 0; n < N; ++n) {
                const float* p = xd + n * img + c * plane;
                float* q = od + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - mu) * is;
            }
        }
    }

    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        std::vector<float> y_saved;
        if (training) y_saved = out.vec();
        tape::record([xi, oi, invstd, y_saved, training, N, C, H, W, m] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            const float* g = oi->grad.data();
            const std::size_t plane = static_cast<std::size_t>(H) * W;
            const std::size_t img = static_cast<std::size_t>(C) * plane;
            for (int c = 0; c < C; ++c) {
                const float is = invstd[c];
                if (!training) {
                    for (int n = 0; n < N; ++n) {
                        const float* gp = g + n * img + c * plane;
                        float* dxp = xi->grad.data() + n * img + c * plane;
                        for (std::size_t i = 0; i < plane; ++i) dxp[i] += gp[i] * is;
                    }
                    continue;
                }
                double gsum = 0.0, gysum = 0.0;
                for (int n = 0; n < N; ++n) {
                    const float* gp = g + n * img + c * plane;
                    const float* yp = y_saved.data() + n * img + c * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        gsum += gp[i];
                        gysum += static_cast<double>(gp[i]) * yp[i];
                    }
                }
                const float gmean = static_cast<float>(gsum / static_cast<double>(m));
                const float gymean = static_cast<float>(gysum / static_cast<double>(m));
                for (int n = 0; n < N; ++n) {
                    const float* gp = g + n * img + c * plane;
                    const float* yp = y_saved.data() + n * img + c * plane;
                    float* dxp = xi->grad.data() + n * img + c * plane;
                    for (std::size_t i = 0; i < plane; ++i)
                        dxp[i] += is * (gp[i] - gmean - yp[i] * gymean);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// activations

namespace {
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
thread_local std::uint64_t g_kink_sig = kFnvOffset;

void fold_kink_signs(const float* v, std::size_t n) {
    std::uint64_t sig = g_kink_sig;
    for (std::size_t i = 0; i < n; ++i) sig = (sig * kFnvPrime) ^ (v[i] >= 0.f ? 1u : 2u);
    g_kink_sig = sig;
}
}  // namespace

namespace kinkprobe {
void reset() { g_kink_sig = kFnvOffset; }
std::uint64_t signature() { return g_kink_sig; }
}  // namespace kinkprobe

Tensor prelu(const Tensor& x, const Tensor& alpha) {
    require_rank(alpha, 1, "prelu alpha");
    const bool shared = alpha.dim(0) == 1;
    if (!shared) {
        if (x.rank() != 4 || x.dim(1) != alpha.dim(0))
            throw std::invalid_argument("prelu: alpha has " + std::to_string(alpha.dim(0)) +
                                        " slopes but input channel axis is " +
                                        shape_str(x.shape()));
    }
    Tensor out(x.shape(), 0.f);
    const float* xd = x.data();
    const float* ad = alpha.data();
    float* od = out.data();
    const std::size_t n = x.numel();
    std::size_t plane = 1, chans = 1;
    if (x.rank() == 4) {
        plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
        chans = static_cast<std::size_t>(x.dim(1));
    }
    fold_kink_signs(xd, n);
    for (std::size_t i = 0; i < n; ++i) {
        const float a = shared ? ad[0] : ad[(i / plane) % chans];
        od[i] = xd[i] >= 0.f ? xd[i] : a * xd[i];
    }
    const bool tracked = track_any({&x, &alpha});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), ai = alpha.impl(), oi = out.impl();
        tape::record([xi, ai, oi, shared, plane, chans, n] {
            if (oi->grad.empty()) return;
            const float* g = oi->grad.data();
            const float* xd = xi->data.data();
            const float* ad = ai->data.data();
            const bool need_dx = wants_grad(xi);
            const bool need_da = wants_grad(ai);
            if (need_dx) xi->ensure_grad();
            if (need_da) ai->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = shared ? 0 : (i / plane) % chans;
                if (xd[i] >= 0.f) {
                    if (need_dx) xi->grad[i] += g[i];
                } else {
                    if (need_dx) xi->grad[i] += g[i] * ad[c];
                    if (need_da) ai->grad[c] += g[i] * xd[i];
                }
            }
        });
    }
    return out;
}

namespace {

Tensor elementwise(const Tensor& x, float (*f)(float, float), float (*df)(float, float, float),
                   float p) {
    Tensor out(x.shape(), 0.f);
    const std::size_t n = x.numel();
    const float* xd = x.data();
    float* od = out.data();
    for (std::size_t i = 0; i < n; ++i) od[i] = f(xd[i], p);
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, df, p, n] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            const float* g = oi->grad.data();
            const float* xd = xi->data.data();
            const float* od = oi->data.data();
            for (std::size_t i = 0; i < n; ++i) xi->grad[i] += g[i] * df(xd[i], od[i], p);
        });
    }
    return out;
}

}  // namespace

Tensor leaky_relu(const Tensor& x, float slope) {
    fold_kink_signs(x.data(), x.numel());
    return elementwise(
        x, [](float v, float s) { return v >= 0.f ? v : s * v; },
        [](float v, float, float s) { return v >= 0.f ? 1.f : s; }, slope);
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.f); }

Tensor sigmoid(const Tensor& x) {
    return elementwise(
        x, [](float v, float) { return stable_sigmoid(v); },
        [](float, float y, float) { return y * (1.f - y); }, 0.f);
}

Tensor scale(const Tensor& x, float s) {
    return elementwise(
        x, [](float v, float k) { return v * k; }, [](float, float, float k) { return k; }, s);
}

Tensor add_scalar(const Tensor& x, float s) {
    return elementwise(
        x, [](float v, float k) { return v + k; }, [](float, float, float) { return 1.f; }, s);
}

Tensor neg(const Tensor& x) { return scale(x, -1.f); }

Tensor log(const Tensor& x) {
    return elementwise(
        x, [](float v, float) { return std::log(v); },
        [](float v, float, float) { return 1.f / v; }, 0.f);
}

Tensor softplus(const Tensor& x) {
    return elementwise(
        x,
        [](float v, float) { return std::max(v, 0.f) + std::log1p(std::exp(-std::fabs(v))); },
        [](float v, float, float) { return stable_sigmoid(v); }, 0.f);
}

// ---------------------------------------------------------------------------
// pooling / linear / shuffle / resize

Tensor global_avg_pool(const Tensor& x) {
    require_rank(x, 4, "global_avg_pool input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({N, C}, 0.f);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += p[i];
            out.data()[n * C + c] = static_cast<float>(s / static_cast<double>(plane));
        }
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, N, C, plane] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            const float inv = 1.f / static_cast<float>(plane);
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const float g = oi->grad[n * C + c] * inv;
                    float* dxp = xi->grad.data() + (static_cast<std::size_t>(n) * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) dxp[i] += g;
                }
        });
    }
    return out;
}

Tensor avg_pool2(const Tensor& x) {
    require_rank(x, 4, "avg_pool2 input");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H < 2 || W < 2) throw std::invalid_argument("avg_pool2: spatial axes must be >= 2");
    const int Ho = H / 2, Wo = W / 2;
    Tensor out({N, C, Ho, Wo}, 0.f);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = x.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
            float* q = out.data() + (static_cast<std::size_t>(n) * C + c) * Ho * Wo;
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow) {
                    const int ih = oh * 2, iw = ow * 2;
                    q[oh * Wo + ow] = 0.25f * (p[ih * W + iw] + p[ih * W + iw + 1] +
                                               p[(ih + 1) * W + iw] + p[(ih + 1) * W + iw + 1]);
                }
        }
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, N, C, H, W, Ho, Wo] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const float* g = oi->grad.data() + (static_cast<std::size_t>(n) * C + c) * Ho * Wo;
                    float* dx = xi->grad.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                    for (int oh = 0; oh < Ho; ++oh)
                        for (int ow = 0; ow < Wo; ++ow) {
                            const float gv = 0.25f * g[oh * Wo + ow];
                            const int ih = oh * 2, iw = ow * 2;
                            dx[ih * W + iw] += gv;
                            dx[ih * W + iw + 1] += gv;
                            dx[(ih + 1) * W + iw] += gv;
                            dx[(ih + 1) * W + iw + 1] += gv;
                        }
                }
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear input");
    require_rank(weight, 2, "linear weight");
    const int N = x.dim(0), Fin = x.dim(1), Fout = weight.dim(0);
    if (weight.dim(1) != Fin)
        throw std::invalid_argument("linear: weight expects " + std::to_string(weight.dim(1)) +
                                    " inputs, got " + std::to_string(Fin));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Fout))
        throw std::invalid_argument("linear: bias axis mismatch " + shape_str(bias.shape()));
    Tensor out({N, Fout}, 0.f);
    for (int n = 0; n < N; ++n)
        for (int fo = 0; fo < Fout; ++fo) {
            double s = bias.defined() ? bias.data()[fo] : 0.0;
            const float* xr = x.data() + static_cast<std::size_t>(n) * Fin;
            const float* wr = weight.data() + static_cast<std::size_t>(fo) * Fin;
            for (int fi = 0; fi < Fin; ++fi) s += static_cast<double>(xr[fi]) * wr[fi];
            out.data()[n * Fout + fo] = static_cast<float>(s);
        }
    const bool tracked = track_any({&x, &weight, &bias});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), wi = weight.impl(), oi = out.impl();
        ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
        tape::record([xi, wi, bi, oi, N, Fin, Fout] {
            if (oi->grad.empty()) return;
            const float* g = oi->grad.data();
            if (wants_grad(xi)) {
                xi->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int fo = 0; fo < Fout; ++fo) {
                        const float gv = g[n * Fout + fo];
                        const float* wr = wi->data.data() + static_cast<std::size_t>(fo) * Fin;
                        float* dx = xi->grad.data() + static_cast<std::size_t>(n) * Fin;
                        for (int fi = 0; fi < Fin; ++fi) dx[fi] += gv * wr[fi];
                    }
            }
            if (wants_grad(wi)) {
                wi->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int fo = 0; fo < Fout; ++fo) {
                        const float gv = g[n * Fout + fo];
                        const float* xr = xi->data.data() + static_cast<std::size_t>(n) * Fin;
                        float* dw = wi->grad.data() + static_cast<std::size_t>(fo) * Fin;
                        for (int fi = 0; fi < Fin; ++fi) dw[fi] += gv * xr[fi];
                    }
            }
            if (bi && wants_grad(bi)) {
                bi->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int fo = 0; fo < Fout; ++fo) bi->grad[fo] += g[n * Fout + fo];
            }
        });
    }
    return out;
}

namespace {

// shuffle=true: [N,C*r^2,H,W] -> [N,C,rH,rW]; shuffle=false is the inverse.
Tensor shuffle_impl(const Tensor& x, int r, bool shuffle) {
    require_rank(x, 4, shuffle ? "pixel_shuffle input" : "pixel_unshuffle input");
    if (r < 1) throw std::invalid_argument("pixel_shuffle: r must be >= 1");
    const int N = x.dim(0);
    int C, H, W;  // geometry of the shuffled (high-resolution) side
    if (shuffle) {
        if (x.dim(1) % (r * r) != 0)
            throw std::invalid_argument("pixel_shuffle: channel axis " + std::to_string(x.dim(1)) +
                                        " not divisible by r^2=" + std::to_string(r * r));
        C = x.dim(1) / (r * r);
        H = x.dim(2) * r;
        W = x.dim(3) * r;
    } else {
        if (x.dim(2) % r != 0 || x.dim(3) % r != 0)
            throw std::invalid_argument("pixel_unshuffle: spatial axes not divisible by r");
        C = x.dim(1);
        H = x.dim(2);
        W = x.dim(3);
    }
    const int h = H / r, w = W / r;
    Shape out_shape = shuffle ? Shape{N, C, H, W} : Shape{N, C * r * r, h, w};
    Tensor out(out_shape, 0.f);
    // lo index: [n, c*r^2 + dy*r + dx, y, x]  <->  hi index: [n, c, y*r+dy, x*r+dx]
    auto run = [&](const float* lo, float* hi, bool lo_to_hi) {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx) {
                        const std::size_t lo_c = static_cast<std::size_t>(c) * r * r + dy * r + dx;
                        for (int y = 0; y < h; ++y)
                            for (int xx = 0; xx < w; ++xx) {
                                const std::size_t li =
                                    ((static_cast<std::size_t>(n) * C * r * r + lo_c) * h + y) * w + xx;
                                const std::size_t hi_i =
                                    ((static_cast<std::size_t>(n) * C + c) * H + y * r + dy) * W +
                                    (static_cast<std::size_t>(xx) * r + dx);
                                if (lo_to_hi)
                                    hi[hi_i] = lo[li];
                                else
                                    hi[li] = lo[hi_i];
                            }
                    }
    };
    run(x.data(), out.data(), shuffle);
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, N, C, H, W, h, w, r, shuffle] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int dy = 0; dy < r; ++dy)
                        for (int dx = 0; dx < r; ++dx) {
                            const std::size_t lo_c = static_cast<std::size_t>(c) * r * r + dy * r + dx;
                            for (int y = 0; y < h; ++y)
                                for (int xx = 0; xx < w; ++xx) {
                                    const std::size_t li =
                                        ((static_cast<std::size_t>(n) * C * r * r + lo_c) * h + y) * w + xx;
                                    const std::size_t hi_i =
                                        ((static_cast<std::size_t>(n) * C + c) * H + y * r + dy) * W +
                                        (static_cast<std::size_t>(xx) * r + dx);
                                    if (shuffle)
                                        xi->grad[li] += oi->grad[hi_i];
                                    else
                                        xi->grad[hi_i] += oi->grad[li];
                                }
                        }
        });
    }
    return out;
}

}  // namespace

Tensor pixel_shuffle(const Tensor& x, int r) { return shuffle_impl(x, r, true); }
Tensor pixel_unshuffle(const Tensor& x, int r) { return shuffle_impl(x, r, false); }

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    require_rank(x, 4, "resize_bilinear input");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad output size");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (out_h == H && out_w == W) {
        // identity path still records through add_scalar-free copy
        Tensor out(x.shape(), x.vec());
        const bool tracked = track_any({&x});
        mark_output(out, tracked);
        if (tracked) {
            ImplPtr xi = x.impl(), oi = out.impl();
            tape::record([xi, oi] {
                if (oi->grad.empty() || !wants_grad(xi)) return;
                xi->ensure_grad();
                for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
            });
        }
        return out;
    }
    Tensor out({N, C, out_h, out_w}, 0.f);
    const float sy = static_cast<float>(H) / out_h;
    const float sx = static_cast<float>(W) / out_w;
    // precompute the sample geometry once; it is reused by the backward pass
    std::vector<int> y0(out_h), y1(out_h);
    std::vector<float> wy(out_h);
    for (int oy = 0; oy < out_h; ++oy) {
        float fy = (oy + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.f, static_cast<float>(H - 1));
        y0[oy] = static_cast<int>(fy);
        y1[oy] = std::min(y0[oy] + 1, H - 1);
        wy[oy] = fy - y0[oy];
    }
    std::vector<int> x0(out_w), x1(out_w);
    std::vector<float> wx(out_w);
    for (int ox = 0; ox < out_w; ++ox) {
        float fx = (ox + 0.5f) * sx - 0.5f;
        fx = std::clamp(fx, 0.f, static_cast<float>(W - 1));
        x0[ox] = static_cast<int>(fx);
        x1[ox] = std::min(x0[ox] + 1, W - 1);
        wx[ox] = fx - x0[ox];
    }
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = x.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
            float* q = out.data() + (static_cast<std::size_t>(n) * C + c) * out_h * out_w;
            for (int oy = 0; oy < out_h; ++oy)
                for (int ox = 0; ox < out_w; ++ox) {
                    const float a = p[y0[oy] * W + x0[ox]], b = p[y0[oy] * W + x1[ox]];
                    const float cc = p[y1[oy] * W + x0[ox]], d = p[y1[oy] * W + x1[ox]];
                    const float top = a + (b - a) * wx[ox];
                    const float bot = cc + (d - cc) * wx[ox];
                    q[oy * out_w + ox] = top + (bot - top) * wy[oy];
                }
        }
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, N, C, H, W, out_h, out_w, y0, y1, wy, x0, x1, wx] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const float* g = oi->grad.data() +
                                     (static_cast<std::size_t>(n) * C + c) * out_h * out_w;
                    float* dx = xi->grad.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                    for (int oy = 0; oy < out_h; ++oy)
                        for (int ox = 0; ox < out_w; ++ox) {
                            const float gv = g[oy * out_w + ox];
                            const float wyv = wy[oy], wxv = wx[ox];
                            dx[y0[oy] * W + x0[ox]] += gv * (1 - wyv) * (1 - wxv);
                            dx[y0[oy] * W + x1[ox]] += gv * (1 - wyv) * wxv;
                            dx[y1[oy] * W + x0[ox]] += gv * wyv * (1 - wxv);
                            dx[y1[oy] * W + x1[ox]] += gv * wyv * wxv;
                        }
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// broadcasting binary ops

namespace {

struct Bcast {
    Shape out;
    std::size_t n = 1;
    // per-axis strides into each operand (0 where broadcast), rank-4 padded
    std::size_t sa[4] = {0, 0, 0, 0}, sb[4] = {0, 0, 0, 0};
    int ext[4] = {1, 1, 1, 1};
    int rank = 0;
};

Bcast make_bcast(const Tensor& a, const Tensor& b, const char* what) {
    Bcast bc;
    bc.rank = std::max(a.rank(), b.rank());
    Shape sa(4, 1), sb(4, 1);
    for (int i = 0; i < a.rank(); ++i) sa[4 - a.rank() + i] = a.dim(i);
    for (int i = 0; i < b.rank(); ++i) sb[4 - b.rank() + i] = b.dim(i);
    std::size_t stra = 1, strb = 1;
    std::size_t stride_a[4], stride_b[4];
    for (int i = 3; i >= 0; --i) {
        stride_a[i] = stra;
        stride_b[i] = strb;
        stra *= static_cast<std::size_t>(sa[i]);
        strb *= static_cast<std::size_t>(sb[i]);
    }
    for (int i = 0; i < 4; ++i) {
        if (sa[i] != sb[i] && sa[i] != 1 && sb[i] != 1)
            throw std::invalid_argument(std::string(what) + ": incompatible shapes " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
        bc.ext[i] = std::max(sa[i], sb[i]);
        bc.sa[i] = sa[i] == 1 ? 0 : stride_a[i];
        bc.sb[i] = sb[i] == 1 ? 0 : stride_b[i];
        bc.n *= static_cast<std::size_t>(bc.ext[i]);
    }
    const Shape& wider = a.rank() >= b.rank() ? a.shape() : b.shape();
    bc.out.assign(wider.size(), 1);
    for (std::size_t i = 0; i < bc.out.size(); ++i) bc.out[i] = bc.ext[4 - bc.out.size() + i];
    return bc;
}

enum class BinOp { Add, Sub, Mul };

Tensor binary_bcast(const Tensor& a, const Tensor& b, BinOp op, const char* what) {
    Bcast bc = make_bcast(a, b, what);
    Tensor out(bc.out, 0.f);
    const float* ad = a.data();
    const float* bd = b.data();
    float* od = out.data();
    std::size_t idx = 0;
    for (int i0 = 0; i0 < bc.ext[0]; ++i0)
        for (int i1 = 0; i1 < bc.ext[1]; ++i1)
            for (int i2 = 0; i2 < bc.ext[2]; ++i2) {
                const std::size_t base_a = i0 * bc.sa[0] + i1 * bc.sa[1] + i2 * bc.sa[2];
                const std::size_t base_b = i0 * bc.sb[0] + i1 * bc.sb[1] + i2 * bc.sb[2];
                for (int i3 = 0; i3 < bc.ext[3]; ++i3, ++idx) {
                    const float av = ad[base_a + i3 * bc.sa[3]];
                    const float bv = bd[base_b + i3 * bc.sb[3]];
                    od[idx] = op == BinOp::Add ? av + bv : op == BinOp::Sub ? av - bv : av * bv;
                }
            }
    const bool tracked = track_any({&a, &b});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape::record([ai, bi, oi, bc, op] {
            if (oi->grad.empty()) return;
            const bool need_da = wants_grad(ai);
            const bool need_db = wants_grad(bi);
            if (need_da) ai->ensure_grad();
            if (need_db) bi->ensure_grad();
            const float* g = oi->grad.data();
            std::size_t idx = 0;
            for (int i0 = 0; i0 < bc.ext[0]; ++i0)
                for (int i1 = 0; i1 < bc.ext[1]; ++i1)
                    for (int i2 = 0; i2 < bc.ext[2]; ++i2) {
                        const std::size_t base_a = i0 * bc.sa[0] + i1 * bc.sa[1] + i2 * bc.sa[2];
                        const std::size_t base_b = i0 * bc.sb[0] + i1 * bc.sb[1] + i2 * bc.sb[2];
                        for (int i3 = 0; i3 < bc.ext[3]; ++i3, ++idx) {
                            const std::size_t ia = base_a + i3 * bc.sa[3];
                            const std::size_t ib = base_b + i3 * bc.sb[3];
                            const float gv = g[idx];
                            switch (op) {
                                case BinOp::Add:
                                    if (need_da) ai->grad[ia] += gv;
                                    if (need_db) bi->grad[ib] += gv;
                                    break;
                                case BinOp::Sub:
                                    if (need_da) ai->grad[ia] += gv;
                                    if (need_db) bi->grad[ib] -= gv;
                                    break;
                                case BinOp::Mul:
                                    if (need_da) ai->grad[ia] += gv * bi->data[ib];
                                    if (need_db) bi->grad[ib] += gv * ai->data[ia];
                                    break;
                            }
                        }
                    }
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_bcast(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_bcast(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_bcast(a, b, BinOp::Mul, "mul"); }

// ---------------------------------------------------------------------------
// reshaping

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " -> " +
                                    shape_str(new_shape) + " changes element count");
    Tensor out(std::move(new_shape), x.vec());
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank(a, 4, "concat_channels");
    require_rank(b, 4, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: non-channel axes differ, " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({N, Ca + Cb, H, W}, 0.f);
    for (int n = 0; n < N; ++n) {
        std::copy(a.data() + n * Ca * plane, a.data() + (n + 1) * Ca * plane,
                  out.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane);
        std::copy(b.data() + n * Cb * plane, b.data() + (n + 1) * Cb * plane,
                  out.data() + (static_cast<std::size_t>(n) * (Ca + Cb) + Ca) * plane);
    }
    const bool tracked = track_any({&a, &b});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape::record([ai, bi, oi, N, Ca, Cb, plane] {
            if (oi->grad.empty()) return;
            if (wants_grad(ai)) {
                ai->ensure_grad();
                for (int n = 0; n < N; ++n) {
                    const float* g = oi->grad.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
                    float* da = ai->grad.data() + static_cast<std::size_t>(n) * Ca * plane;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(Ca) * plane; ++i) da[i] += g[i];
                }
            }
            if (wants_grad(bi)) {
                bi->ensure_grad();
                for (int n = 0; n < N; ++n) {
                    const float* g = oi->grad.data() +
                                     (static_cast<std::size_t>(n) * (Ca + Cb) + Ca) * plane;
                    float* db = bi->grad.data() + static_cast<std::size_t>(n) * Cb * plane;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(Cb) * plane; ++i) db[i] += g[i];
                }
            }
        });
    }
    return out;
}

Tensor slice_axis1(const Tensor& x, int start, int count) {
    if (x.rank() < 2) throw std::invalid_argument("slice_axis1: rank must be >= 2");
    const int C = x.dim(1);
    if (start < 0 || count < 1 || start + count > C)
        throw std::invalid_argument("slice_axis1: range [" + std::to_string(start) + "," +
                                    std::to_string(start + count) + ") outside axis of " +
                                    std::to_string(C));
    const int N = x.dim(0);
    std::size_t inner = 1;
    for (int i = 2; i < x.rank(); ++i) inner *= static_cast<std::size_t>(x.dim(i));
    Shape out_shape = x.shape();
    out_shape[1] = count;
    Tensor out(out_shape, 0.f);
    for (int n = 0; n < N; ++n)
        std::copy(x.data() + (static_cast<std::size_t>(n) * C + start) * inner,
                  x.data() + (static_cast<std::size_t>(n) * C + start + count) * inner,
                  out.data() + static_cast<std::size_t>(n) * count * inner);
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, N, C, start, count, inner] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            for (int n = 0; n < N; ++n) {
                const float* g = oi->grad.data() + static_cast<std::size_t>(n) * count * inner;
                float* dx = xi->grad.data() + (static_cast<std::size_t>(n) * C + start) * inner;
                for (std::size_t i = 0; i < static_cast<std::size_t>(count) * inner; ++i) dx[i] += g[i];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions / losses

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x.data()[i];
    Tensor out({1}, {static_cast<float>(s)});
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            const float g = oi->grad[0];
            for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += g;
        });
    }
    return out;
}

Tensor mean_all(const Tensor& x) {
    const std::size_t n = x.numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x.data()[i];
    Tensor out({1}, {static_cast<float>(s / static_cast<double>(n))});
    const bool tracked = track_any({&x});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape::record([xi, oi, n] {
            if (oi->grad.empty() || !wants_grad(xi)) return;
            xi->ensure_grad();
            const float g = oi->grad[0] / static_cast<float>(n);
            for (std::size_t i = 0; i < n; ++i) xi->grad[i] += g;
        });
    }
    return out;
}

Tensor mse_mean(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("mse_mean: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const std::size_t n = a.numel();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        s += d * d;
    }
    Tensor out({1}, {static_cast<float>(s / static_cast<double>(n))});
    const bool tracked = track_any({&a, &b});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape::record([ai, bi, oi, n] {
            if (oi->grad.empty()) return;
            const float g = oi->grad[0] * 2.f / static_cast<float>(n);
            const bool da = wants_grad(ai), db = wants_grad(bi);
            if (da) ai->ensure_grad();
            if (db) bi->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const float d = ai->data[i] - bi->data[i];
                if (da) ai->grad[i] += g * d;
                if (db) bi->grad[i] -= g * d;
            }
        });
    }
    return out;
}

Tensor bce(const Tensor& p, float target) {
    if (target < 0.f || target > 1.f) throw std::invalid_argument("bce: target outside [0,1]");
    const std::size_t n = p.numel();
    constexpr double kEps = 1e-12;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pv = std::clamp(static_cast<double>(p.data()[i]), kEps, 1.0 - kEps);
        s += -(target * std::log(pv) + (1.0 - target) * std::log(1.0 - pv));
    }
    Tensor out({1}, {static_cast<float>(s / static_cast<double>(n))});
    const bool tracked = track_any({&p});
    mark_output(out, tracked);
    if (tracked) {
        ImplPtr pi = p.impl(), oi = out.impl();
        tape::record([pi, oi, target, n] {
            if (oi->grad.empty() || !wants_grad(pi)) return;
            pi->ensure_grad();
            constexpr double kEps = 1e-12;
            const float g = oi->grad[0] / static_cast<float>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double pv = std::clamp(static_cast<double>(pi->data[i]), kEps, 1.0 - kEps);
                pi->grad[i] += g * static_cast<float>(-(target / pv) + (1.0 - target) / (1.0 - pv));
            }
        });
    }
    return out;
}

}  // namespace ops
}  // namespace edgesr
