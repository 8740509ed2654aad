#pragma once

#include <array>

#include "vigen/tensor.hpp"

namespace vigen {

// 6-parameter affine map, row-major [[a,b,tx],[c,d,ty]]. Applied to the
// normalized [-1,1] coordinates of each output pixel, it yields the source
// location to sample (backward warping).
struct AffineTransform {
    std::array<float, 6> params{1.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f};

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(float tx, float ty) {
        return AffineTransform{{1.0f, 0.0f, tx, 0.0f, 1.0f, ty}};
    }
    static AffineTransform from_span(std::span<const float> p);

    Tensor to_tensor() const;
};

// Source-coordinate lookup, one normalized (x,y) pair per output pixel.
struct SampleGrid {
    Tensor coords;  // [H,W,2]

    int height() const { return coords.dim(0); }
    int width() const { return coords.dim(1); }
};

// params [...,6] -> grid [...,H,W,2]. Output pixel (row,col) has normalized
// coordinates x = 2*col/(W-1)-1, y = 2*row/(H-1)-1; the grid stores
// T*(x,y,1)^T. Differentiable w.r.t. params; extents must be >= 2.
Tensor affine_grid(const Tensor& params, int height, int width);
SampleGrid affine_grid(const AffineTransform& t, int height, int width);

// image [N,C,H,W], grids [N,P,Hg,Wg,2] -> [N,P,C,Hg,Wg]. Normalized grid
// coordinates are mapped to pixel units, then sampled with the tent kernel
// max(0,1-|dx|)*max(0,1-|dy|); samples outside the image contribute zero.
// Differentiable w.r.t. the image and the grid coordinates.
Tensor bilinear_sample_multi(const Tensor& image, const Tensor& grids);

// image [C,H,W] -> [C,Hg,Wg]
Tensor bilinear_sample(const Tensor& image, const SampleGrid& grid);

// bilinear_sample(image, affine_grid(t, H, W))
Tensor warp_image(const Tensor& image, const AffineTransform& t);
Tensor warp_image(const Tensor& image, const Tensor& params);

}  // namespace vigen
