#include "vigen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace vigen {

namespace {

using detail::accumulate_grad;
using detail::check;

// Downstream gradient of an op output; empty span means no gradient flowed
// here and the backward rule can bail out.
std::span<const float> out_grad(const Tensor& t) {
    const auto& g = t.node()->grad;
    return {g.data(), g.size()};
}

bool wants_grad(const Tensor& t) { return t.requires_grad(); }

void mark_output(Tensor& out) {
    if (grad_enabled()) out.set_requires_grad(true);
}

// ---- small GEMM kernels (row-major, accumulate into C) --------------------

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const float av = arow[l];
            const float* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            float acc = 0.0f;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c) {
    for (int l = 0; l < k; ++l) {
        const float* arow = a + static_cast<size_t>(l) * m;
        const float* brow = b + static_cast<size_t>(l) * n;
        for (int i = 0; i < m; ++i) {
            const float av = arow[i];
            float* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---- im2col / col2im -------------------------------------------------------

// col[(ci*kh+i)*kw+j][oh*Wo+ow] = im[ci][oh*stride+i-pad][ow*stride+j-pad], zero outside
void im2col(const float* im, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, float* col) {
    for (int ci = 0; ci < C; ++ci) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                float* dst =
                    col + (static_cast<size_t>(ci * kh + i) * kw + j) * (static_cast<size_t>(Ho) * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    const int ih = oh * stride + i - pad;
                    float* drow = dst + static_cast<size_t>(oh) * Wo;
                    if (ih < 0 || ih >= H) {
                        std::fill(drow, drow + Wo, 0.0f);
                        continue;
                    }
                    const float* srow = im + (static_cast<size_t>(ci) * H + ih) * W;
                    for (int ow = 0; ow < Wo; ++ow) {
                        const int iw = ow * stride + j - pad;
                        drow[ow] = (iw >= 0 && iw < W) ? srow[iw] : 0.0f;
                    }
                }
            }
        }
    }
}

// im[ci][oh*stride+i-pad][ow*stride+j-pad] += col[(ci*kh+i)*kw+j][oh*Wo+ow]
void col2im(const float* col, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, float* im) {
    for (int ci = 0; ci < C; ++ci) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const float* src =
                    col + (static_cast<size_t>(ci * kh + i) * kw + j) * (static_cast<size_t>(Ho) * Wo);
                for (int oh = 0; oh < Ho; ++oh) {
                    const int ih = oh * stride + i - pad;
                    if (ih < 0 || ih >= H) continue;
                    const float* srow = src + static_cast<size_t>(oh) * Wo;
                    float* drow = im + (static_cast<size_t>(ci) * H + ih) * W;
                    for (int ow = 0; ow < Wo; ++ow) {
                        const int iw = ow * stride + j - pad;
                        if (iw >= 0 && iw < W) drow[iw] += srow[ow];
                    }
                }
            }
        }
    }
}

int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

void check_conv_args(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                     int padding, const char* op) {
    check(input.defined() && input.rank() == 4,
          std::string(op) + ": input must be rank-4 [N,C,H,W], got " +
              (input.defined() ? shape_str(input.shape()) : std::string("undefined")));
    check(kernel.defined() && kernel.rank() == 4,
          std::string(op) + ": kernel must be rank-4, got " +
              (kernel.defined() ? shape_str(kernel.shape()) : std::string("undefined")));
    check(bias.defined() && bias.rank() == 1,
          std::string(op) + ": bias must be rank-1, got " +
              (bias.defined() ? shape_str(bias.shape()) : std::string("undefined")));
    check(stride >= 1, std::string(op) + ": stride must be >= 1, got " + std::to_string(stride));
    check(padding >= 0,
          std::string(op) + ": padding must be >= 0, got " + std::to_string(padding));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
    check_conv_args(input, kernel, bias, stride, padding, "conv2d");
    const int N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    check(kernel.dim(1) == Cin, "conv2d: kernel input-channel dim is " +
                                    std::to_string(kernel.dim(1)) + " but input has " +
                                    std::to_string(Cin) + " channels");
    check(bias.dim(0) == Cout, "conv2d: bias has " + std::to_string(bias.dim(0)) +
                                   " entries but kernel has " + std::to_string(Cout) +
                                   " output channels");
    check(kh <= H + 2 * padding && kw <= W + 2 * padding,
          "conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
              " exceeds padded input " + std::to_string(H + 2 * padding) + "x" +
              std::to_string(W + 2 * padding));

    const int Ho = conv_out_extent(H, kh, stride, padding);
    const int Wo = conv_out_extent(W, kw, stride, padding);
    const int ck = Cin * kh * kw;
    const size_t plane_in = static_cast<size_t>(Cin) * H * W;
    const size_t plane_out = static_cast<size_t>(Cout) * Ho * Wo;

    Tensor out = Tensor::zeros({N, Cout, Ho, Wo});
    {
        std::vector<float> col(static_cast<size_t>(ck) * Ho * Wo);
        const float* x = input.values().data();
        const float* k = kernel.values().data();
        const float* b = bias.values().data();
        float* y = out.values().data();
        for (int n = 0; n < N; ++n) {
            im2col(x + n * plane_in, Cin, H, W, kh, kw, stride, padding, Ho, Wo, col.data());
            float* yn = y + n * plane_out;
            for (int co = 0; co < Cout; ++co)
                std::fill(yn + static_cast<size_t>(co) * Ho * Wo,
                          yn + static_cast<size_t>(co + 1) * Ho * Wo, b[co]);
            gemm_nn(Cout, Ho * Wo, ck, k, col.data(), yn);
        }
    }

    if (grad_enabled() && (wants_grad(input) || wants_grad(kernel) || wants_grad(bias))) {
        mark_output(out);
        Tensor x = input, k = kernel, b = bias, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            const int hw = Ho * Wo;
            std::vector<float> col(static_cast<size_t>(ck) * hw);
            const bool need_x = x.requires_grad();
            const bool need_k = k.requires_grad();
            const bool need_b = b.requires_grad();
            std::vector<float> gcol;
            if (need_x) gcol.resize(col.size());
            for (int n = 0; n < N; ++n) {
                const float* gyn = gy.data() + n * plane_out;
                if (need_b) {
                    float* gb = b.grad().data();
                    for (int co = 0; co < Cout; ++co) {
                        float acc = 0.0f;
                        const float* row = gyn + static_cast<size_t>(co) * hw;
                        for (int i = 0; i < hw; ++i) acc += row[i];
                        gb[co] += acc;
                    }
                }
                if (need_k || need_x) {
                    if (need_k) {
                        im2col(x.values().data() + n * plane_in, Cin, H, W, kh, kw, stride,
                               padding, Ho, Wo, col.data());
                        gemm_nt(Cout, ck, hw, gyn, col.data(), k.grad().data());
                    }
                    if (need_x) {
                        std::fill(gcol.begin(), gcol.end(), 0.0f);
                        gemm_tn(ck, hw, Cout, k.values().data(), gyn, gcol.data());
                        col2im(gcol.data(), Cin, H, W, kh, kw, stride, padding, Ho, Wo,
                               x.grad().data() + n * plane_in);
                    }
                }
            }
        });
    }
    return out;
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                         int stride, int padding) {
    check_conv_args(input, kernel, bias, stride, padding, "transposed_conv2d");
    const int N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Cout = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    check(kernel.dim(0) == Cin, "transposed_conv2d: kernel input-channel dim is " +
                                    std::to_string(kernel.dim(0)) + " but input has " +
                                    std::to_string(Cin) + " channels");
    check(bias.dim(0) == Cout, "transposed_conv2d: bias has " + std::to_string(bias.dim(0)) +
                                   " entries but kernel has " + std::to_string(Cout) +
                                   " output channels");
    const int Ho = (H - 1) * stride - 2 * padding + kh;
    const int Wo = (W - 1) * stride - 2 * padding + kw;
    check(Ho >= 1 && Wo >= 1, "transposed_conv2d: output extent " + std::to_string(Ho) + "x" +
                                  std::to_string(Wo) + " is degenerate");

    const int ck = Cout * kh * kw;
    const size_t plane_in = static_cast<size_t>(Cin) * H * W;
    const size_t plane_out = static_cast<size_t>(Cout) * Ho * Wo;

    Tensor out = Tensor::zeros({N, Cout, Ho, Wo});
    {
        std::vector<float> col(static_cast<size_t>(ck) * H * W);
        const float* x = input.values().data();
        const float* k = kernel.values().data();
        const float* b = bias.values().data();
        float* y = out.values().data();
        for (int n = 0; n < N; ++n) {
            std::fill(col.begin(), col.end(), 0.0f);
            // col = K^T * x_n, with K viewed as [Cin, Cout*kh*kw]
            gemm_tn(ck, H * W, Cin, k, x + n * plane_in, col.data());
            float* yn = y + n * plane_out;
            for (int co = 0; co < Cout; ++co)
                std::fill(yn + static_cast<size_t>(co) * Ho * Wo,
                          yn + static_cast<size_t>(co + 1) * Ho * Wo, b[co]);
            col2im(col.data(), Cout, Ho, Wo, kh, kw, stride, padding, H, W, yn);
        }
    }

    if (grad_enabled() && (wants_grad(input) || wants_grad(kernel) || wants_grad(bias))) {
        mark_output(out);
        Tensor x = input, k = kernel, b = bias, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            const int hw = H * W;
            const bool need_x = x.requires_grad();
            const bool need_k = k.requires_grad();
            const bool need_b = b.requires_grad();
            std::vector<float> col(static_cast<size_t>(ck) * hw);
            for (int n = 0; n < N; ++n) {
                const float* gyn = gy.data() + n * plane_out;
                if (need_b) {
                    float* gb = b.grad().data();
                    for (int co = 0; co < Cout; ++co) {
                        float acc = 0.0f;
                        const float* row = gyn + static_cast<size_t>(co) * Ho * Wo;
                        for (int i = 0; i < Ho * Wo; ++i) acc += row[i];
                        gb[co] += acc;
                    }
                }
                if (need_x || need_k) {
                    im2col(gyn, Cout, Ho, Wo, kh, kw, stride, padding, H, W, col.data());
                    if (need_x)
                        gemm_nn(Cin, hw, ck, k.values().data(), col.data(),
                                x.grad().data() + n * plane_in);
                    if (need_k)
                        gemm_nt(Cin, ck, hw, x.values().data() + n * plane_in, col.data(),
                                k.grad().data());
                }
            }
        });
    }
    return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    check(input.defined() && input.rank() == 2,
          "dense: input must be rank-2 [N,Din], got " +
              (input.defined() ? shape_str(input.shape()) : std::string("undefined")));
    check(weight.defined() && weight.rank() == 2, "dense: weight must be rank-2 [Dout,Din]");
    check(bias.defined() && bias.rank() == 1, "dense: bias must be rank-1 [Dout]");
    const int N = input.dim(0), Din = input.dim(1);
    const int Dout = weight.dim(0);
    check(weight.dim(1) == Din, "dense: weight expects " + std::to_string(weight.dim(1)) +
                                    " input features but input has " + std::to_string(Din));
    check(bias.dim(0) == Dout, "dense: bias has " + std::to_string(bias.dim(0)) +
                                   " entries but weight has " + std::to_string(Dout) + " rows");

    Tensor out = Tensor::zeros({N, Dout});
    {
        float* y = out.values().data();
        const float* b = bias.values().data();
        for (int n = 0; n < N; ++n)
            std::copy(b, b + Dout, y + static_cast<size_t>(n) * Dout);
        gemm_nt(N, Dout, Din, input.values().data(), weight.values().data(), y);
    }

    if (grad_enabled() && (wants_grad(input) || wants_grad(weight) || wants_grad(bias))) {
        mark_output(out);
        Tensor x = input, w = weight, b = bias, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            if (b.requires_grad()) {
                float* gb = b.grad().data();
                for (int n = 0; n < N; ++n)
                    for (int j = 0; j < Dout; ++j) gb[j] += gy[static_cast<size_t>(n) * Dout + j];
            }
            if (x.requires_grad())
                gemm_nn(N, Din, Dout, gy.data(), w.values().data(), x.grad().data());
            if (w.requires_grad())
                gemm_tn(Dout, Din, N, gy.data(), x.values().data(), w.grad().data());
        });
    }
    return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& input, const char* op, Fwd fwd, Bwd dfdx_from_xy) {
    check(input.defined(), std::string(op) + ": undefined input");
    Tensor out = Tensor::zeros(input.shape());
    {
        auto xv = input.values();
        auto yv = out.values();
        for (size_t i = 0; i < xv.size(); ++i) yv[i] = fwd(xv[i]);
    }
    if (grad_enabled() && wants_grad(input)) {
        mark_output(out);
        Tensor x = input, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            auto g = x.grad();
            auto xv = x.values();
            auto yv = y.values();
            for (size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * dfdx_from_xy(xv[i], yv[i]);
        });
    }
    return out;
}

}  // namespace

Tensor leaky_relu(const Tensor& input, float alpha) {
    check(alpha > 0.0f && alpha < 1.0f,
          "leaky_relu: alpha must be in (0,1), got " + std::to_string(alpha));
    return unary_elementwise(
        input, "leaky_relu", [alpha](float x) { return x > 0.0f ? x : alpha * x; },
        [alpha](float x, float) { return x > 0.0f ? 1.0f : alpha; });
}

Tensor tanh_act(const Tensor& input) {
    return unary_elementwise(
        input, "tanh", [](float x) { return std::tanh(x); },
        [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid(const Tensor& input) {
    return unary_elementwise(
        input, "sigmoid", [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
        [](float, float y) { return y * (1.0f - y); });
}

Tensor softmax_channels(const Tensor& input) {
    check(input.defined() && input.rank() == 4,
          "softmax_channels: input must be rank-4 [N,P,H,W], got " +
              (input.defined() ? shape_str(input.shape()) : std::string("undefined")));
    const int N = input.dim(0), P = input.dim(1), H = input.dim(2), W = input.dim(3);
    check(P >= 1, "softmax_channels: channel axis must be >= 1");
    const size_t hw = static_cast<size_t>(H) * W;
    const size_t plane = static_cast<size_t>(P) * hw;

    Tensor out = Tensor::zeros(input.shape());
    {
        const float* x = input.values().data();
        float* y = out.values().data();
        for (int n = 0; n < N; ++n) {
            for (size_t px = 0; px < hw; ++px) {
                const float* xc = x + n * plane + px;
                float* yc = y + n * plane + px;
                float m = xc[0];
                for (int p = 1; p < P; ++p) m = std::max(m, xc[p * hw]);
                float sum = 0.0f;
                for (int p = 0; p < P; ++p) {
                    const float e = std::exp(xc[p * hw] - m);
                    yc[p * hw] = e;
                    sum += e;
                }
                const float inv = 1.0f / sum;
                for (int p = 0; p < P; ++p) yc[p * hw] *= inv;
            }
        }
    }

    if (grad_enabled() && wants_grad(input)) {
        mark_output(out);
        Tensor x = input, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gys = out_grad(y);
            if (gys.empty()) return;
            const float* gy = gys.data();
            const float* yv = y.values().data();
            float* gx = x.grad().data();
            for (int n = 0; n < N; ++n) {
                for (size_t px = 0; px < hw; ++px) {
                    const size_t base = n * plane + px;
                    float dot = 0.0f;
                    for (int p = 0; p < P; ++p) dot += gy[base + p * hw] * yv[base + p * hw];
                    for (int p = 0; p < P; ++p) {
                        const size_t i = base + p * hw;
                        gx[i] += yv[i] * (gy[i] - dot);
                    }
                }
            }
        });
    }
    return out;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    check(a.defined() && b.defined(), std::string(op) + ": undefined operand");
    check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    {
        auto av = a.values();
        auto bv = b.values();
        auto yv = out.values();
        for (size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
    }
    if (grad_enabled() && (wants_grad(a) || wants_grad(b))) {
        mark_output(out);
        Tensor ta = a, tb = b, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            if (ta.requires_grad()) accumulate_grad(ta.node(), gy);
            if (tb.requires_grad()) accumulate_grad(tb.node(), gy);
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape());
    {
        auto av = a.values();
        auto bv = b.values();
        auto yv = out.values();
        for (size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] - bv[i];
    }
    if (grad_enabled() && (wants_grad(a) || wants_grad(b))) {
        mark_output(out);
        Tensor ta = a, tb = b, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            if (ta.requires_grad()) accumulate_grad(ta.node(), gy);
            if (tb.requires_grad()) accumulate_grad(tb.node(), gy, -1.0f);
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    {
        auto av = a.values();
        auto bv = b.values();
        auto yv = out.values();
        for (size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
    }
    if (grad_enabled() && (wants_grad(a) || wants_grad(b))) {
        mark_output(out);
        Tensor ta = a, tb = b, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            if (ta.requires_grad()) {
                auto g = ta.grad();
                auto bv = tb.values();
                for (size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * bv[i];
            }
            if (tb.requires_grad()) {
                auto g = tb.grad();
                auto av = ta.values();
                for (size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * av[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, float s) {
    check(a.defined(), "scale: undefined operand");
    Tensor out = Tensor::zeros(a.shape());
    {
        auto av = a.values();
        auto yv = out.values();
        for (size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * s;
    }
    if (grad_enabled() && wants_grad(a)) {
        mark_output(out);
        Tensor ta = a, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            accumulate_grad(ta.node(), gy, s);
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    check(!parts.empty(), "concat: no parts given");
    const Tensor& first = parts.front();
    check(first.defined(), "concat: undefined part");
    const int rank = first.rank();
    check(axis >= 0 && axis < rank,
          "concat: axis " + std::to_string(axis) + " out of range for rank " +
              std::to_string(rank));

    Shape out_shape = first.shape();
    for (size_t p = 1; p < parts.size(); ++p) {
        check(parts[p].defined() && parts[p].rank() == rank,
              "concat: part " + std::to_string(p) + " rank mismatch");
        for (int d = 0; d < rank; ++d) {
            if (d == axis) continue;
            check(parts[p].dim(d) == first.dim(d),
                  "concat: part " + std::to_string(p) + " dim " + std::to_string(d) + " is " +
                      std::to_string(parts[p].dim(d)) + ", expected " +
                      std::to_string(first.dim(d)));
        }
        out_shape[static_cast<size_t>(axis)] += parts[p].dim(axis);
    }

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= first.dim(d);
    for (int d = axis + 1; d < rank; ++d) inner *= first.dim(d);
    const int64_t out_axis = out_shape[static_cast<size_t>(axis)];

    Tensor out = Tensor::zeros(out_shape);
    {
        float* y = out.values().data();
        int64_t offset = 0;
        for (const Tensor& part : parts) {
            const int64_t block = part.dim(axis) * inner;
            const float* src = part.values().data();
            for (int64_t o = 0; o < outer; ++o) {
                std::copy(src + o * block, src + (o + 1) * block,
                          y + o * out_axis * inner + offset * inner);
            }
            offset += part.dim(axis);
        }
    }

    bool any_grad = false;
    for (const Tensor& part : parts) any_grad = any_grad || wants_grad(part);
    if (grad_enabled() && any_grad) {
        mark_output(out);
        std::vector<Tensor> held = parts;
        Tensor y = out;
        Tape::active()->record(out, [=, held = std::move(held)]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            int64_t offset = 0;
            for (Tensor& part : held) {
                const int64_t block = part.dim(axis) * inner;
                if (part.requires_grad()) {
                    float* g = part.grad().data();
                    for (int64_t o = 0; o < outer; ++o) {
                        const float* src = gy.data() + o * out_axis * inner + offset * inner;
                        float* dst = g + o * block;
                        for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
                    }
                }
                offset += part.dim(axis);
            }
        });
    }
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) { return concat(parts, 1); }

namespace {

Tensor reduce_impl(const Tensor& input, const char* op, bool mean) {
    check(input.defined() && input.numel() >= 1, std::string(op) + ": undefined or empty input");
    double acc = 0.0;
    for (float v : input.values()) acc += v;
    const float denom = mean ? static_cast<float>(input.numel()) : 1.0f;
    Tensor out = Tensor::scalar(static_cast<float>(acc) / denom);
    if (grad_enabled() && wants_grad(input)) {
        mark_output(out);
        Tensor x = input, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            const float g = gy[0] / denom;
            auto gx = x.grad();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

}  // namespace

Tensor reduce_mean(const Tensor& input) { return reduce_impl(input, "reduce_mean", true); }

Tensor reduce_sum(const Tensor& input) { return reduce_impl(input, "reduce_sum", false); }

Tensor reshape(const Tensor& input, Shape new_shape) {
    check(input.defined(), "reshape: undefined input");
    check(numel_of(new_shape) == input.numel(),
          "reshape: cannot view " + shape_str(input.shape()) + " as " + shape_str(new_shape));
    Tensor out = Tensor::from_data(std::move(new_shape),
                                   {input.values().begin(), input.values().end()});
    if (grad_enabled() && wants_grad(input)) {
        mark_output(out);
        Tensor x = input, y = out;
        Tape::active()->record(out, [=]() mutable {
            auto gy = out_grad(y);
            if (gy.empty()) return;
            accumulate_grad(x.node(), gy);
        });
    }
    return out;
}

}  // namespace vigen
