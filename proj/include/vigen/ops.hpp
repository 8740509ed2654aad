#pragma once

#include <vector>

#include "vigen/tensor.hpp"

namespace vigen {

// Cross-correlation. input [N,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout];
// output [N,Cout,H',W'] with H' = floor((H+2*padding-kh)/stride)+1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding);

// Adjoint of conv2d w.r.t. its input, used as a forward op. input [N,Cin,H,W],
// kernel [Cin,Cout,kh,kw], bias [Cout]; output [N,Cout,H'',W''] with
// H'' = (H-1)*stride - 2*padding + kh.
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                         int stride, int padding);

// input [N,Din], weight [Dout,Din], bias [Dout] -> [N,Dout]
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor leaky_relu(const Tensor& input, float alpha);
Tensor tanh_act(const Tensor& input);
Tensor sigmoid(const Tensor& input);

// Softmax over axis 1 of [N,P,H,W], computed with max subtraction.
Tensor softmax_channels(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

Tensor concat(const std::vector<Tensor>& parts, int axis);
// concat along axis 1 of [N,C,...] tensors
Tensor concat_channels(const std::vector<Tensor>& parts);

Tensor reduce_mean(const Tensor& input);
Tensor reduce_sum(const Tensor& input);

// Same data, new shape (copying); numel must match.
Tensor reshape(const Tensor& input, Shape new_shape);

}  // namespace vigen
