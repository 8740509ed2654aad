#pragma once

#include <vector>

#include "vigen/tensor.hpp"

namespace vigen {

// Per-pixel convex weights over P transformed images; rows sum to 1 across
// the P axis (softmax upstream).
struct MaskStack {
    Tensor masks;  // [P,H,W]

    int count() const { return masks.dim(0); }
    int height() const { return masks.dim(1); }
    int width() const { return masks.dim(2); }
};

// warped [N,P,C,H,W], masks [N,P,H,W] -> [N,C,H,W]:
// out(n,c,h,w) = sum_p masks(n,p,h,w) * warped(n,p,c,h,w).
// Differentiable w.r.t. both inputs.
Tensor merge_masked_multi(const Tensor& warped, const Tensor& masks);

// P single images [C,H,W] merged under a MaskStack -> [C,H,W].
Tensor merge_masked(const std::vector<Tensor>& transformed, const MaskStack& masks);

}  // namespace vigen
