#include "vigen/merge.hpp"

#include "vigen/ops.hpp"

namespace vigen {

using detail::check;

Tensor merge_masked_multi(const Tensor& warped, const Tensor& masks) {
    check(warped.defined() && warped.rank() == 5,
          "merge_masked: warped must be rank-5 [N,P,C,H,W], got " +
              (warped.defined() ? shape_str(warped.shape()) : std::string("undefined")));
    check(masks.defined() && masks.rank() == 4,
          "merge_masked: masks must be rank-4 [N,P,H,W], got " +
              (masks.defined() ? shape_str(masks.shape()) : std::string("undefined")));
    const int N = warped.dim(0), P = warped.dim(1), C = warped.dim(2), H = warped.dim(3),
              W = warped.dim(4);
    check(P >= 1, "merge_masked: need at least one transform plane");
    check(masks.dim(0) == N && masks.dim(1) == P,
          "merge_masked: masks are " + shape_str(masks.shape()) + " but warped stack is " +
              shape_str(warped.shape()));
    check(masks.dim(2) == H && masks.dim(3) == W,
          "merge_masked: mask plane " + std::to_string(masks.dim(2)) + "x" +
              std::to_string(masks.dim(3)) + " does not match image plane " +
              std::to_string(H) + "x" + std::to_string(W));

    const size_t hw = static_cast<size_t>(H) * W;
    const size_t chw = static_cast<size_t>(C) * hw;

    Tensor out = Tensor::zeros({N, C, H, W});
    {
        const float* xv = warped.values().data();
        const float* mv = masks.values().data();
        float* yv = out.values().data();
        for (int n = 0; n < N; ++n) {
            float* yn = yv + n * chw;
            for (int p = 0; p < P; ++p) {
                const float* m = mv + (static_cast<size_t>(n) * P + p) * hw;
                const float* x = xv + (static_cast<size_t>(n) * P + p) * chw;
                for (int c = 0; c < C; ++c) {
                    const float* xc = x + c * hw;
                    float* yc = yn + c * hw;
                    for (size_t k = 0; k < hw; ++k) yc[k] += m[k] * xc[k];
                }
            }
        }
    }

    if (grad_enabled() && (warped.requires_grad() || masks.requires_grad())) {
        Tensor x = warped, m = masks, y = out.set_requires_grad(true);
        Tape::active()->record(out, [=]() mutable {
            const auto& gybuf = y.node()->grad;
            if (gybuf.empty()) return;
            const bool need_x = x.requires_grad();
            const bool need_m = m.requires_grad();
            float* gx = need_x ? x.grad().data() : nullptr;
            float* gm = need_m ? m.grad().data() : nullptr;
            const float* xv = x.values().data();
            const float* mv = m.values().data();
            for (int n = 0; n < N; ++n) {
                const float* gyn = gybuf.data() + n * chw;
                for (int p = 0; p < P; ++p) {
                    const size_t np = static_cast<size_t>(n) * P + p;
                    const float* mp = mv + np * hw;
                    for (int c = 0; c < C; ++c) {
                        const float* gyc = gyn + c * hw;
                        if (need_x) {
                            float* gxc = gx + np * chw + c * hw;
                            for (size_t k = 0; k < hw; ++k) gxc[k] += mp[k] * gyc[k];
                        }
                        if (need_m) {
                            const float* xc = xv + np * chw + c * hw;
                            float* gmp = gm + np * hw;
                            for (size_t k = 0; k < hw; ++k) gmp[k] += xc[k] * gyc[k];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor merge_masked(const std::vector<Tensor>& transformed, const MaskStack& masks) {
    check(!transformed.empty(), "merge_masked: need at least one transformed image");
    const Tensor& first = transformed.front();
    check(first.defined() && first.rank() == 3,
          "merge_masked: images must be rank-3 [C,H,W], got " +
              (first.defined() ? shape_str(first.shape()) : std::string("undefined")));
    const int C = first.dim(0), H = first.dim(1), W = first.dim(2);
    std::vector<Tensor> lifted;
    lifted.reserve(transformed.size());
    for (size_t p = 0; p < transformed.size(); ++p) {
        check(transformed[p].defined() && transformed[p].shape() == first.shape(),
              "merge_masked: image " + std::to_string(p) + " has shape " +
                  shape_str(transformed[p].shape()) + ", expected " + shape_str(first.shape()));
        lifted.push_back(reshape(transformed[p], {1, 1, C, H, W}));
    }
    const int P = static_cast<int>(transformed.size());
    check(masks.masks.defined() && masks.masks.rank() == 3 && masks.count() == P,
          "merge_masked: mask stack has " +
              std::to_string(masks.masks.defined() ? masks.count() : 0) + " planes, expected " +
              std::to_string(P));
    Tensor stack = P == 1 ? lifted[0] : concat(lifted, 1);
    Tensor mask4 = reshape(masks.masks, {1, P, masks.height(), masks.width()});
    return reshape(merge_masked_multi(stack, mask4), {C, H, W});
}

}  // namespace vigen
