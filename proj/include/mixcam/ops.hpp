#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mixcam/tensor.hpp"

// Differentiable primitives. Every op validates shapes (throwing a shape
// error that names the op and the offending shapes), computes the forward
// value, and records an exact vector-Jacobian product on the active tape
// whenever an input requires gradients.
namespace mixcam::ops {

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scalar_mul(const Tensor& x, double c);
Tensor scalar_add(const Tensor& x, double c);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);  // log(1 + e^x), overflow-safe
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor pow(const Tensor& x, double exponent);
Tensor clamp_min(const Tensor& x, double floor);  // gradient passes where x > floor

// a[M,K] x b[K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[Ci,H,W] (*) kernel[Co,Ci,kh,kw] -> [Co,OH,OW] with zero padding.
// bias may be an undefined Tensor; when defined it must be [Co].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

Tensor softmax(const Tensor& x, std::size_t axis);

// Reductions drop the reduced axes (reducing all axes yields a rank-0 scalar).
Tensor sum(const Tensor& x, std::vector<std::size_t> axes);
Tensor sum_all(const Tensor& x);
Tensor mean(const Tensor& x, std::vector<std::size_t> axes);
Tensor mean_all(const Tensor& x);
Tensor reduce_max(const Tensor& x, std::vector<std::size_t> axes);
Tensor reduce_max_all(const Tensor& x);

// [C,H,W] -> [C]; spatial mean per channel.
Tensor global_avg_pool(const Tensor& x);

// Numpy-style broadcast (align trailing axes; extents of 1 expand).
Tensor broadcast_to(const Tensor& x, Shape target);

Tensor reshape(const Tensor& x, Shape target);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);

// Contiguous sub-range [start, start+len) along one axis.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len);

}  // namespace mixcam::ops
