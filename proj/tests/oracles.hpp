#pragma once

// Reference implementations used as independent test oracles. Everything here
// is written as plain nested loops straight from the definitions and must stay
// independent of the library's fast paths.

#include <cmath>
#include <vector>

#include "vigen/tensor.hpp"

namespace oracles {

// direct cross-correlation, six nested loops
inline vigen::Tensor conv2d_reference(const vigen::Tensor& x, const vigen::Tensor& k,
                                      const vigen::Tensor& b, int stride, int pad) {
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    vigen::Tensor y = vigen::Tensor::zeros({N, Cout, Ho, Wo});
    auto X = x.values();
    auto K = k.values();
    auto B = b.values();
    auto Y = y.values();
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow) {
                    double acc = B[co];
                    for (int ci = 0; ci < Cin; ++ci)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                const int ih = oh * stride + i - pad;
                                const int iw = ow * stride + j - pad;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += X[((static_cast<size_t>(n) * Cin + ci) * H + ih) * W + iw] *
                                       K[((static_cast<size_t>(co) * Cin + ci) * kh + i) * kw + j];
                            }
                    Y[((static_cast<size_t>(n) * Cout + co) * Ho + oh) * Wo + ow] =
                        static_cast<float>(acc);
                }
    return y;
}

// adjoint-of-conv scatter, the defining semantics of transposed convolution
inline vigen::Tensor transposed_conv2d_reference(const vigen::Tensor& x, const vigen::Tensor& k,
                                                 const vigen::Tensor& b, int stride, int pad) {
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = k.dim(1), kh = k.dim(2), kw = k.dim(3);
    const int Ho = (H - 1) * stride - 2 * pad + kh;
    const int Wo = (W - 1) * stride - 2 * pad + kw;
    vigen::Tensor y = vigen::Tensor::zeros({N, Cout, Ho, Wo});
    auto X = x.values();
    auto K = k.values();
    auto B = b.values();
    auto Y = y.values();
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow)
                    Y[((static_cast<size_t>(n) * Cout + co) * Ho + oh) * Wo + ow] = B[co];
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Cin; ++ci)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const float xv =
                        X[((static_cast<size_t>(n) * Cin + ci) * H + h) * W + w];
                    for (int co = 0; co < Cout; ++co)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                const int oh = h * stride + i - pad;
                                const int ow = w * stride + j - pad;
                                if (oh < 0 || oh >= Ho || ow < 0 || ow >= Wo) continue;
                                Y[((static_cast<size_t>(n) * Cout + co) * Ho + oh) * Wo + ow] +=
                                    xv *
                                    K[((static_cast<size_t>(ci) * Cout + co) * kh + i) * kw + j];
                            }
                }
    return y;
}

// integer translation with zero padding: out(r,c) = in(r - dy, c - dx)
inline vigen::Tensor shift_reference(const vigen::Tensor& img, int dx, int dy) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    vigen::Tensor out = vigen::Tensor::zeros({C, H, W});
    auto in = img.values();
    auto o = out.values();
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < H; ++r)
            for (int col = 0; col < W; ++col) {
                const int sr = r - dy, sc = col - dx;
                if (sr < 0 || sr >= H || sc < 0 || sc >= W) continue;
                o[(static_cast<size_t>(c) * H + r) * W + col] =
                    in[(static_cast<size_t>(c) * H + sr) * W + sc];
            }
    return out;
}

// per-pixel mask compositing loop
inline vigen::Tensor merge_reference(const std::vector<vigen::Tensor>& parts,
                                     const vigen::Tensor& masks) {
    const int P = static_cast<int>(parts.size());
    const int C = parts[0].dim(0), H = parts[0].dim(1), W = parts[0].dim(2);
    vigen::Tensor out = vigen::Tensor::zeros({C, H, W});
    auto o = out.values();
    auto m = masks.values();
    for (int p = 0; p < P; ++p) {
        auto x = parts[static_cast<size_t>(p)].values();
        for (int c = 0; c < C; ++c)
            for (int r = 0; r < H; ++r)
                for (int col = 0; col < W; ++col) {
                    const size_t pix = static_cast<size_t>(r) * W + col;
                    o[c * static_cast<size_t>(H) * W + pix] +=
                        m[p * static_cast<size_t>(H) * W + pix] *
                        x[c * static_cast<size_t>(H) * W + pix];
                }
    }
    return out;
}

inline double max_abs_diff(const vigen::Tensor& a, const vigen::Tensor& b) {
    auto av = a.values();
    auto bv = b.values();
    if (av.size() != bv.size()) return 1e30;
    double worst = 0.0;
    for (size_t i = 0; i < av.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(av[i]) - bv[i]));
    return worst;
}

}  // namespace oracles
