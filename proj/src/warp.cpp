#include "vigen/warp.hpp"

#include <cmath>

#include "vigen/ops.hpp"

namespace vigen {

using detail::check;

AffineTransform AffineTransform::from_span(std::span<const float> p) {
    check(p.size() == 6, "AffineTransform: expected 6 parameters, got " +
                             std::to_string(p.size()));
    AffineTransform t;
    std::copy(p.begin(), p.end(), t.params.begin());
    return t;
}

Tensor AffineTransform::to_tensor() const {
    return Tensor::from_data({6}, {params.begin(), params.end()});
}

Tensor affine_grid(const Tensor& params, int height, int width) {
    check(params.defined() && params.rank() >= 1 && params.dim(params.rank() - 1) == 6,
          "affine_grid: params must have trailing dimension 6, got " +
              (params.defined() ? shape_str(params.shape()) : std::string("undefined")));
    check(height >= 2 && width >= 2, "affine_grid: extents must be >= 2, got " +
                                         std::to_string(height) + "x" + std::to_string(width));
    const int64_t leading = params.numel() / 6;
    const size_t hw2 = static_cast<size_t>(height) * width * 2;

    Shape out_shape(params.shape().begin(), params.shape().end() - 1);
    out_shape.push_back(height);
    out_shape.push_back(width);
    out_shape.push_back(2);

    Tensor out = Tensor::zeros(out_shape);
    {
        const float* p = params.values().data();
        float* g = out.values().data();
        for (int64_t l = 0; l < leading; ++l) {
            const float* t = p + l * 6;
            float* dst = g + l * hw2;
            for (int r = 0; r < height; ++r) {
                const float y = 2.0f * r / (height - 1) - 1.0f;
                for (int c = 0; c < width; ++c) {
                    const float x = 2.0f * c / (width - 1) - 1.0f;
                    dst[(static_cast<size_t>(r) * width + c) * 2 + 0] =
                        t[0] * x + t[1] * y + t[2];
                    dst[(static_cast<size_t>(r) * width + c) * 2 + 1] =
                        t[3] * x + t[4] * y + t[5];
                }
            }
        }
    }

    if (grad_enabled() && params.requires_grad()) {
        Tensor p = params, y = out.set_requires_grad(true);
        Tape::active()->record(out, [=]() mutable {
            const auto& gbuf = y.node()->grad;
            if (gbuf.empty()) return;
            float* gp = p.grad().data();
            for (int64_t l = 0; l < leading; ++l) {
                const float* gy = gbuf.data() + l * hw2;
                float* gt = gp + l * 6;
                for (int r = 0; r < height; ++r) {
                    const float ny = 2.0f * r / (height - 1) - 1.0f;
                    for (int c = 0; c < width; ++c) {
                        const float nx = 2.0f * c / (width - 1) - 1.0f;
                        const float gx = gy[(static_cast<size_t>(r) * width + c) * 2 + 0];
                        const float gyy = gy[(static_cast<size_t>(r) * width + c) * 2 + 1];
                        gt[0] += gx * nx;
                        gt[1] += gx * ny;
                        gt[2] += gx;
                        gt[3] += gyy * nx;
                        gt[4] += gyy * ny;
                        gt[5] += gyy;
                    }
                }
            }
        });
    }
    return out;
}

SampleGrid affine_grid(const AffineTransform& t, int height, int width) {
    return SampleGrid{affine_grid(t.to_tensor(), height, width)};
}

Tensor bilinear_sample_multi(const Tensor& image, const Tensor& grids) {
    check(image.defined() && image.rank() == 4,
          "bilinear_sample: image must be rank-4 [N,C,H,W], got " +
              (image.defined() ? shape_str(image.shape()) : std::string("undefined")));
    check(grids.defined() && grids.rank() == 5 && grids.dim(4) == 2,
          "bilinear_sample: grids must be rank-5 [N,P,H,W,2], got " +
              (grids.defined() ? shape_str(grids.shape()) : std::string("undefined")));
    check(image.dim(0) == grids.dim(0),
          "bilinear_sample: batch mismatch, image has " + std::to_string(image.dim(0)) +
              " but grids have " + std::to_string(grids.dim(0)));

    const int N = image.dim(0), C = image.dim(1), H = image.dim(2), W = image.dim(3);
    const int P = grids.dim(1), Hg = grids.dim(2), Wg = grids.dim(3);
    const size_t img_plane = static_cast<size_t>(C) * H * W;
    const size_t chw = static_cast<size_t>(H) * W;
    const size_t grid_plane = static_cast<size_t>(P) * Hg * Wg * 2;
    const size_t out_pix = static_cast<size_t>(Hg) * Wg;

    Tensor out = Tensor::zeros({N, P, C, Hg, Wg});
    const float sx = 0.5f * (W - 1);
    const float sy = 0.5f * (H - 1);
    {
        const float* img = image.values().data();
        const float* grd = grids.values().data();
        float* y = out.values().data();
        for (int n = 0; n < N; ++n) {
            const float* in = img + n * img_plane;
            for (int p = 0; p < P; ++p) {
                const float* g = grd + n * grid_plane + static_cast<size_t>(p) * Hg * Wg * 2;
                float* yo = y + (static_cast<size_t>(n) * P + p) * C * out_pix;
                for (size_t k = 0; k < out_pix; ++k) {
                    const float px = (g[k * 2 + 0] + 1.0f) * sx;
                    const float py = (g[k * 2 + 1] + 1.0f) * sy;
                    const int x0 = static_cast<int>(std::floor(px));
                    const int y0 = static_cast<int>(std::floor(py));
                    const float fx = px - x0, fy = py - y0;
                    const float w00 = (1.0f - fx) * (1.0f - fy);
                    const float w01 = fx * (1.0f - fy);
                    const float w10 = (1.0f - fx) * fy;
                    const float w11 = fx * fy;
                    const bool x0_in = x0 >= 0 && x0 < W, x1_in = x0 + 1 >= 0 && x0 + 1 < W;
                    const bool y0_in = y0 >= 0 && y0 < H, y1_in = y0 + 1 >= 0 && y0 + 1 < H;
                    for (int c = 0; c < C; ++c) {
                        const float* plane = in + c * chw;
                        float acc = 0.0f;
                        if (y0_in && x0_in) acc += w00 * plane[static_cast<size_t>(y0) * W + x0];
                        if (y0_in && x1_in)
                            acc += w01 * plane[static_cast<size_t>(y0) * W + x0 + 1];
                        if (y1_in && x0_in)
                            acc += w10 * plane[static_cast<size_t>(y0 + 1) * W + x0];
                        if (y1_in && x1_in)
                            acc += w11 * plane[static_cast<size_t>(y0 + 1) * W + x0 + 1];
                        yo[c * out_pix + k] = acc;
                    }
                }
            }
        }
    }

    if (grad_enabled() && (image.requires_grad() || grids.requires_grad())) {
        Tensor im = image, gr = grids, y = out.set_requires_grad(true);
        Tape::active()->record(out, [=]() mutable {
            const auto& gybuf = y.node()->grad;
            if (gybuf.empty()) return;
            const bool need_img = im.requires_grad();
            const bool need_grid = gr.requires_grad();
            float* gi = need_img ? im.grad().data() : nullptr;
            float* gg = need_grid ? gr.grad().data() : nullptr;
            const float* img = im.values().data();
            const float* grd = gr.values().data();
            for (int n = 0; n < N; ++n) {
                const float* in = img + n * img_plane;
                float* gin = need_img ? gi + n * img_plane : nullptr;
                for (int p = 0; p < P; ++p) {
                    const float* g =
                        grd + n * grid_plane + static_cast<size_t>(p) * Hg * Wg * 2;
                    float* gG =
                        need_grid ? gg + n * grid_plane + static_cast<size_t>(p) * Hg * Wg * 2
                                  : nullptr;
                    const float* gy = gybuf.data() + (static_cast<size_t>(n) * P + p) * C * out_pix;
                    for (size_t k = 0; k < out_pix; ++k) {
                        const float px = (g[k * 2 + 0] + 1.0f) * sx;
                        const float py = (g[k * 2 + 1] + 1.0f) * sy;
                        const int x0 = static_cast<int>(std::floor(px));
                        const int y0 = static_cast<int>(std::floor(py));
                        const float fx = px - x0, fy = py - y0;
                        const bool x0_in = x0 >= 0 && x0 < W, x1_in = x0 + 1 >= 0 && x0 + 1 < W;
                        const bool y0_in = y0 >= 0 && y0 < H, y1_in = y0 + 1 >= 0 && y0 + 1 < H;
                        float dpx = 0.0f, dpy = 0.0f;
                        for (int c = 0; c < C; ++c) {
                            const float gyc = gy[c * out_pix + k];
                            if (gyc == 0.0f && !need_grid) continue;
                            const float* plane = in + c * chw;
                            const float v00 =
                                (y0_in && x0_in) ? plane[static_cast<size_t>(y0) * W + x0] : 0.0f;
                            const float v01 = (y0_in && x1_in)
                                                  ? plane[static_cast<size_t>(y0) * W + x0 + 1]
                                                  : 0.0f;
                            const float v10 = (y1_in && x0_in)
                                                  ? plane[static_cast<size_t>(y0 + 1) * W + x0]
                                                  : 0.0f;
                            const float v11 =
                                (y1_in && x1_in)
                                    ? plane[static_cast<size_t>(y0 + 1) * W + x0 + 1]
                                    : 0.0f;
                            if (need_img) {
                                float* gplane = gin + c * chw;
                                if (y0_in && x0_in)
                                    gplane[static_cast<size_t>(y0) * W + x0] +=
                                        gyc * (1.0f - fx) * (1.0f - fy);
                                if (y0_in && x1_in)
                                    gplane[static_cast<size_t>(y0) * W + x0 + 1] +=
                                        gyc * fx * (1.0f - fy);
                                if (y1_in && x0_in)
                                    gplane[static_cast<size_t>(y0 + 1) * W + x0] +=
                                        gyc * (1.0f - fx) * fy;
                                if (y1_in && x1_in)
                                    gplane[static_cast<size_t>(y0 + 1) * W + x0 + 1] +=
                                        gyc * fx * fy;
                            }
                            if (need_grid) {
                                dpx += gyc * ((v01 - v00) * (1.0f - fy) + (v11 - v10) * fy);
                                dpy += gyc * ((v10 - v00) * (1.0f - fx) + (v11 - v01) * fx);
                            }
                        }
                        if (need_grid) {
                            gG[k * 2 + 0] += dpx * sx;
                            gG[k * 2 + 1] += dpy * sy;
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor bilinear_sample(const Tensor& image, const SampleGrid& grid) {
    check(image.defined() && image.rank() == 3,
          "bilinear_sample: image must be rank-3 [C,H,W], got " +
              (image.defined() ? shape_str(image.shape()) : std::string("undefined")));
    check(grid.coords.defined() && grid.coords.rank() == 3 && grid.coords.dim(2) == 2,
          "bilinear_sample: grid must be [H,W,2]");
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const int Hg = grid.height(), Wg = grid.width();
    Tensor img4 = reshape(image, {1, C, H, W});
    Tensor grid5 = reshape(grid.coords, {1, 1, Hg, Wg, 2});
    Tensor out5 = bilinear_sample_multi(img4, grid5);
    return reshape(out5, {C, Hg, Wg});
}

Tensor warp_image(const Tensor& image, const Tensor& params) {
    check(image.defined() && image.rank() == 3,
          "warp_image: image must be rank-3 [C,H,W], got " +
              (image.defined() ? shape_str(image.shape()) : std::string("undefined")));
    const int H = image.dim(1), W = image.dim(2);
    return bilinear_sample(image, SampleGrid{affine_grid(params, H, W)});
}

Tensor warp_image(const Tensor& image, const AffineTransform& t) {
    return warp_image(image, t.to_tensor());
}

}  // namespace vigen
