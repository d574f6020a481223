#include "mixcam/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <utility>

#include "mixcam/kernels.hpp"

namespace mixcam::ops {
namespace {

using detail::NodePtr;
using detail::TensorNode;
using detail::grad_buffer;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  fail(ErrorCategory::shape, std::string(op) + ": " + detail);
}

void check_defined(const char* op, std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (!t->defined()) fail(ErrorCategory::state, std::string(op) + ": undefined tensor operand");
  }
}

// Marks the output and records the vjp if a tape is active and any input
// requires gradients.
void finish(std::initializer_list<const Tensor*> ins, Tensor& out, std::function<void()> vjp) {
  bool rg = false;
  for (const Tensor* t : ins) rg = rg || t->requires_grad();
  out.node()->requires_grad = rg;
  Tape* tape = Tape::active();
  if (!tape || !rg) return;
  std::vector<NodePtr> nodes;
  nodes.reserve(ins.size());
  for (const Tensor* t : ins) nodes.push_back(t->node());
  out.node()->producer = tape;
  tape->record(std::move(nodes), out.node(), std::move(vjp));
}

Tensor binary_same_shape(const char* op, const Tensor& a, const Tensor& b,
                         void (*fwd)(const double*, const double*, double*, std::size_t),
                         std::function<void()> (*make_vjp)(NodePtr, NodePtr, NodePtr)) {
  check_defined(op, {&a, &b});
  if (!same_shape(a.shape(), b.shape())) {
    shape_fail(op, "operand shapes differ: " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.shape());
  fwd(a.value().data(), b.value().data(), out.value_mut().data(), a.size());
  finish({&a, &b}, out, make_vjp(a.node(), b.node(), out.node()));
  return out;
}

// Unary elementwise helper; dy is evaluated from the saved input and output.
template <typename Fwd, typename Dydx>
Tensor unary_ew(const char* op, const Tensor& x, Fwd f, Dydx dydx) {
  check_defined(op, {&x});
  Tensor out = Tensor::zeros(x.shape());
  const auto xv = x.value();
  auto ov = out.value_mut();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  finish({&x}, out, [xn = x.node(), on = out.node(), dydx] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += g[i] * dydx(xn->value[i], on->value[i]);
    }
  });
  return out;
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  r.extent = s[axis];
  for (std::size_t d = 0; d < axis; ++d) r.outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

std::vector<bool> axis_mask(const char* op, const Shape& s, const std::vector<std::size_t>& axes) {
  if (axes.empty()) shape_fail(op, "no reduction axes given");
  std::vector<bool> mask(s.size(), false);
  for (std::size_t a : axes) {
    if (a >= s.size()) {
      shape_fail(op, "axis " + std::to_string(a) + " out of range for shape " + shape_str(s));
    }
    mask[a] = true;
  }
  return mask;
}

Shape reduced_shape(const Shape& s, const std::vector<bool>& mask) {
  Shape out;
  for (std::size_t d = 0; d < s.size(); ++d) {
    if (!mask[d]) out.push_back(s[d]);
  }
  return out;
}

// Output strides per input dim (0 for reduced dims) so that walking the input
// in row-major order yields the matching output offset incrementally.
std::vector<std::size_t> out_strides(const Shape& s, const std::vector<bool>& mask) {
  std::vector<std::size_t> st(s.size(), 0);
  std::size_t stride = 1;
  for (std::size_t d = s.size(); d-- > 0;) {
    if (!mask[d]) {
      st[d] = stride;
      stride *= s[d];
    }
  }
  return st;
}

// Visits every input element in row-major order, calling fn(in_flat, out_flat).
template <typename Fn>
void for_each_mapped(const Shape& s, const std::vector<std::size_t>& ostride, Fn&& fn) {
  const std::size_t n = shape_numel(s);
  const std::size_t rank = s.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t out_flat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, out_flat);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < s[d]) {
        out_flat += ostride[d];
        break;
      }
      idx[d] = 0;
      out_flat -= ostride[d] * (s[d] - 1);
    }
  }
}

void im2col(const double* x, std::size_t ci, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            double* patches) {
  const std::size_t cols = oh * ow;
  for (std::size_t c = 0; c < ci; ++c) {
    const double* plane = x + c * h * w;
    for (std::size_t u = 0; u < kh; ++u) {
      for (std::size_t v = 0; v < kw; ++v) {
        double* row = patches + ((c * kh + u) * kw + v) * cols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy =
              static_cast<std::int64_t>(oy * stride + u) - static_cast<std::int64_t>(pad);
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= static_cast<std::int64_t>(h)) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix =
                static_cast<std::int64_t>(ox * stride + v) - static_cast<std::int64_t>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::int64_t>(w))
                          ? 0.0
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const double* patches, std::size_t ci, std::size_t h, std::size_t w,
                std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                std::size_t oh, std::size_t ow, double* gx) {
  const std::size_t cols = oh * ow;
  for (std::size_t c = 0; c < ci; ++c) {
    double* plane = gx + c * h * w;
    for (std::size_t u = 0; u < kh; ++u) {
      for (std::size_t v = 0; v < kw; ++v) {
        const double* row = patches + ((c * kh + u) * kw + v) * cols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy =
              static_cast<std::int64_t>(oy * stride + u) - static_cast<std::int64_t>(pad);
          if (iy < 0 || iy >= static_cast<std::int64_t>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          const double* src = row + oy * ow;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix =
                static_cast<std::int64_t>(ox * stride + v) - static_cast<std::int64_t>(pad);
            if (ix < 0 || ix >= static_cast<std::int64_t>(w)) continue;
            dst[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      "add", a, b, kernels::active().add, +[](NodePtr an, NodePtr bn, NodePtr on) {
        return std::function<void()>([an, bn, on] {
          const auto& g = on->grad;
          if (an->requires_grad) {
            kernels::active().axpy(1.0, g.data(), grad_buffer(*an).data(), g.size());
          }
          if (bn->requires_grad) {
            kernels::active().axpy(1.0, g.data(), grad_buffer(*bn).data(), g.size());
          }
        });
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      "sub", a, b, kernels::active().sub, +[](NodePtr an, NodePtr bn, NodePtr on) {
        return std::function<void()>([an, bn, on] {
          const auto& g = on->grad;
          if (an->requires_grad) {
            kernels::active().axpy(1.0, g.data(), grad_buffer(*an).data(), g.size());
          }
          if (bn->requires_grad) {
            kernels::active().axpy(-1.0, g.data(), grad_buffer(*bn).data(), g.size());
          }
        });
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      "multiply", a, b, kernels::active().mul, +[](NodePtr an, NodePtr bn, NodePtr on) {
        return std::function<void()>([an, bn, on] {
          const auto& g = on->grad;
          if (an->requires_grad) {
            auto& ga = grad_buffer(*an);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->value[i];
          }
          if (bn->requires_grad) {
            auto& gb = grad_buffer(*bn);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->value[i];
          }
        });
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_defined("divide", {&a, &b});
  if (!same_shape(a.shape(), b.shape())) {
    shape_fail("divide", "operand shapes differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.value();
  const auto bv = b.value();
  auto ov = out.value_mut();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] / bv[i];
  finish({&a, &b}, out, [an = a.node(), bn = b.node(), on = out.node()] {
    const auto& g = on->grad;
    if (an->requires_grad) {
      auto& ga = grad_buffer(*an);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bn->value[i];
    }
    if (bn->requires_grad) {
      auto& gb = grad_buffer(*bn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        gb[i] -= g[i] * an->value[i] / (bn->value[i] * bn->value[i]);
      }
    }
  });
  return out;
}

Tensor scalar_mul(const Tensor& x, double c) {
  check_defined("scalar-multiply", {&x});
  Tensor out = Tensor::zeros(x.shape());
  kernels::active().scale(x.value().data(), c, out.value_mut().data(), x.size());
  finish({&x}, out, [xn = x.node(), on = out.node(), c] {
    if (!xn->requires_grad) return;
    kernels::active().axpy(c, on->grad.data(), grad_buffer(*xn).data(), on->grad.size());
  });
  return out;
}

Tensor scalar_add(const Tensor& x, double c) {
  check_defined("scalar-add", {&x});
  Tensor out = Tensor::zeros(x.shape());
  const auto xv = x.value();
  auto ov = out.value_mut();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] + c;
  finish({&x}, out, [xn = x.node(), on = out.node()] {
    if (!xn->requires_grad) return;
    kernels::active().axpy(1.0, on->grad.data(), grad_buffer(*xn).data(), on->grad.size());
  });
  return out;
}

Tensor relu(const Tensor& x) {
  check_defined("relu", {&x});
  Tensor out = Tensor::zeros(x.shape());
  kernels::active().relu(x.value().data(), out.value_mut().data(), x.size());
  finish({&x}, out, [xn = x.node(), on = out.node()] {
    if (!xn->requires_grad) return;
    kernels::active().relu_grad(xn->value.data(), on->grad.data(), grad_buffer(*xn).data(),
                                on->grad.size());
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return unary_ew(
      "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary_ew(
      "softplus", x, [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor log(const Tensor& x) {
  return unary_ew(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary_ew(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor pow(const Tensor& x, double exponent) {
  return unary_ew(
      "power", x, [exponent](double v) { return std::pow(v, exponent); },
      [exponent](double v, double) { return exponent * std::pow(v, exponent - 1.0); });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary_ew(
      "clamp-min", x, [floor](double v) { return v > floor ? v : floor; },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined("matmul", {&a, &b});
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_fail("matmul", "incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = Tensor::zeros({m, n});
  kernels::active().gemm_nn(m, n, k, a.value().data(), k, b.value().data(), n,
                            out.value_mut().data(), n);
  finish({&a, &b}, out, [an = a.node(), bn = b.node(), on = out.node(), m, n, k] {
    const double* g = on->grad.data();
    if (an->requires_grad) {
      // gA[M,K] += g[M,N] * B[K,N]^T
      kernels::active().gemm_nt(m, k, n, g, n, bn->value.data(), n, grad_buffer(*an).data(), k);
    }
    if (bn->requires_grad) {
      // gB[K,N] += A[M,K]^T * g[M,N]
      kernels::active().gemm_tn(k, n, m, an->value.data(), k, g, n, grad_buffer(*bn).data(), n);
    }
  });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  check_defined("conv2d", {&x, &kernel});
  if (x.rank() != 3 || kernel.rank() != 4 || kernel.shape()[1] != x.shape()[0]) {
    shape_fail("conv2d", "input " + shape_str(x.shape()) + " incompatible with kernel " +
                             shape_str(kernel.shape()));
  }
  if (stride == 0) shape_fail("conv2d", "stride must be positive");
  const std::size_t ci = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t co = kernel.shape()[0], kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (h + 2 * padding < kh || w + 2 * padding < kw) {
    shape_fail("conv2d", "kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                             shape_str(x.shape()));
  }
  if (bias.defined() && !(bias.rank() == 1 && bias.shape()[0] == co)) {
    shape_fail("conv2d", "bias " + shape_str(bias.shape()) + " must be [" + std::to_string(co) +
                             "]");
  }
  const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (w + 2 * padding - kw) / stride + 1;
  const std::size_t ckk = ci * kh * kw;
  const std::size_t cols = oh * ow;

  auto patches = std::make_shared<std::vector<double>>(ckk * cols);
  im2col(x.value().data(), ci, h, w, kh, kw, stride, padding, oh, ow, patches->data());

  Tensor out = Tensor::zeros({co, oh, ow});
  kernels::active().gemm_nn(co, cols, ckk, kernel.value().data(), ckk, patches->data(), cols,
                            out.value_mut().data(), cols);
  if (bias.defined()) {
    auto ov = out.value_mut();
    const auto bv = bias.value();
    for (std::size_t c = 0; c < co; ++c) {
      double* plane = ov.data() + c * cols;
      const double b = bv[c];
      for (std::size_t j = 0; j < cols; ++j) plane[j] += b;
    }
  }

  auto vjp = [xn = x.node(), kn = kernel.node(), bn = bias.defined() ? bias.node() : nullptr,
              on = out.node(), patches, ci, h, w, kh, kw, stride, padding, oh, ow, co, ckk,
              cols] {
    const double* g = on->grad.data();
    if (kn->requires_grad) {
      // gK[Co,CKK] += g[Co,cols] * patches[CKK,cols]^T
      kernels::active().gemm_nt(co, ckk, cols, g, cols, patches->data(), cols,
                                grad_buffer(*kn).data(), ckk);
    }
    if (xn->requires_grad) {
      std::vector<double> gpatches(ckk * cols, 0.0);
      // gPatches[CKK,cols] += K[Co,CKK]^T * g[Co,cols]
      kernels::active().gemm_tn(ckk, cols, co, kn->value.data(), ckk, g, cols, gpatches.data(),
                                cols);
      col2im_add(gpatches.data(), ci, h, w, kh, kw, stride, padding, oh, ow,
                 grad_buffer(*xn).data());
    }
    if (bn && bn->requires_grad) {
      auto& gb = grad_buffer(*bn);
      for (std::size_t c = 0; c < co; ++c) {
        gb[c] += kernels::active().reduce_sum(g + c * cols, cols);
      }
    }
  };
  if (bias.defined()) {
    finish({&x, &kernel, &bias}, out, std::move(vjp));
  } else {
    finish({&x, &kernel}, out, std::move(vjp));
  }
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  check_defined("softmax", {&x});
  if (axis >= x.rank()) {
    shape_fail("softmax", "axis " + std::to_string(axis) + " out of range for shape " +
                              shape_str(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  Tensor out = Tensor::zeros(x.shape());
  const auto xv = x.value();
  auto ov = out.value_mut();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.extent * sp.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < sp.extent; ++a) mx = std::max(mx, xv[base + a * sp.inner]);
      double denom = 0.0;
      for (std::size_t a = 0; a < sp.extent; ++a) {
        const double e = std::exp(xv[base + a * sp.inner] - mx);
        ov[base + a * sp.inner] = e;
        denom += e;
      }
      for (std::size_t a = 0; a < sp.extent; ++a) ov[base + a * sp.inner] /= denom;
    }
  }
  finish({&x}, out, [xn = x.node(), on = out.node(), sp] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    const auto& y = on->value;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.extent * sp.inner + in;
        double dotgy = 0.0;
        for (std::size_t a = 0; a < sp.extent; ++a) {
          const std::size_t i = base + a * sp.inner;
          dotgy += g[i] * y[i];
        }
        for (std::size_t a = 0; a < sp.extent; ++a) {
          const std::size_t i = base + a * sp.inner;
          gx[i] += y[i] * (g[i] - dotgy);
        }
      }
    }
  });
  return out;
}

Tensor sum(const Tensor& x, std::vector<std::size_t> axes) {
  check_defined("sum", {&x});
  const auto mask = axis_mask("sum", x.shape(), axes);
  Tensor out = Tensor::zeros(reduced_shape(x.shape(), mask));
  const auto ostride = out_strides(x.shape(), mask);
  const auto xv = x.value();
  auto ov = out.value_mut();
  for_each_mapped(x.shape(), ostride, [&](std::size_t i, std::size_t oi) { ov[oi] += xv[i]; });
  finish({&x}, out, [xn = x.node(), on = out.node(), shape = x.shape(), ostride] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    for_each_mapped(shape, ostride, [&](std::size_t i, std::size_t oi) { gx[i] += g[oi]; });
  });
  return out;
}

Tensor sum_all(const Tensor& x) {
  check_defined("sum", {&x});
  Tensor out = Tensor::scalar(kernels::active().reduce_sum(x.value().data(), x.size()));
  finish({&x}, out, [xn = x.node(), on = out.node()] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const double g = on->grad[0];
    for (double& v : gx) v += g;
  });
  return out;
}

Tensor mean(const Tensor& x, std::vector<std::size_t> axes) {
  check_defined("mean", {&x});
  const auto mask = axis_mask("mean", x.shape(), axes);
  Tensor out = Tensor::zeros(reduced_shape(x.shape(), mask));
  if (out.size() == 0 || x.size() == 0) shape_fail("mean", "empty tensor");
  const double inv = static_cast<double>(out.size()) / static_cast<double>(x.size());
  const auto ostride = out_strides(x.shape(), mask);
  const auto xv = x.value();
  auto ov = out.value_mut();
  for_each_mapped(x.shape(), ostride,
                  [&](std::size_t i, std::size_t oi) { ov[oi] += xv[i] * inv; });
  finish({&x}, out, [xn = x.node(), on = out.node(), shape = x.shape(), ostride, inv] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    for_each_mapped(shape, ostride,
                    [&](std::size_t i, std::size_t oi) { gx[i] += g[oi] * inv; });
  });
  return out;
}

Tensor mean_all(const Tensor& x) {
  check_defined("mean", {&x});
  if (x.size() == 0) shape_fail("mean", "empty tensor");
  const double inv = 1.0 / static_cast<double>(x.size());
  Tensor out = Tensor::scalar(kernels::active().reduce_sum(x.value().data(), x.size()) * inv);
  finish({&x}, out, [xn = x.node(), on = out.node(), inv] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const double g = on->grad[0] * inv;
    for (double& v : gx) v += g;
  });
  return out;
}

Tensor reduce_max(const Tensor& x, std::vector<std::size_t> axes) {
  check_defined("max", {&x});
  const auto mask = axis_mask("max", x.shape(), axes);
  Tensor out = Tensor::full(reduced_shape(x.shape(), mask),
                            -std::numeric_limits<double>::infinity());
  const auto ostride = out_strides(x.shape(), mask);
  const auto xv = x.value();
  auto ov = out.value_mut();
  // Ties resolve to the first (row-major) position; gradients follow suit.
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size(), 0);
  for_each_mapped(x.shape(), ostride, [&](std::size_t i, std::size_t oi) {
    if (xv[i] > ov[oi]) {
      ov[oi] = xv[i];
      (*argmax)[oi] = i;
    }
  });
  finish({&x}, out, [xn = x.node(), on = out.node(), argmax] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    for (std::size_t oi = 0; oi < g.size(); ++oi) gx[(*argmax)[oi]] += g[oi];
  });
  return out;
}

Tensor reduce_max_all(const Tensor& x) {
  check_defined("max", {&x});
  if (x.size() == 0) shape_fail("max", "empty tensor");
  const auto xv = x.value();
  const double mx = kernels::active().reduce_max(xv.data(), xv.size());
  Tensor out = Tensor::scalar(mx);
  auto arg = std::make_shared<std::size_t>(0);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (xv[i] == mx) {
      *arg = i;
      break;
    }
  }
  finish({&x}, out, [xn = x.node(), on = out.node(), arg] {
    if (!xn->requires_grad) return;
    grad_buffer(*xn)[*arg] += on->grad[0];
  });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  check_defined("global-average-pool", {&x});
  if (x.rank() != 3) {
    shape_fail("global-average-pool", "expected [C,H,W], got " + shape_str(x.shape()));
  }
  const std::size_t c = x.shape()[0];
  const std::size_t hw = x.shape()[1] * x.shape()[2];
  if (hw == 0) shape_fail("global-average-pool", "empty spatial extent");
  Tensor out = Tensor::zeros({c});
  const auto xv = x.value();
  auto ov = out.value_mut();
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t i = 0; i < c; ++i) {
    ov[i] = kernels::active().reduce_sum(xv.data() + i * hw, hw) * inv;
  }
  finish({&x}, out, [xn = x.node(), on = out.node(), c, hw, inv] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    for (std::size_t i = 0; i < c; ++i) {
      const double g = on->grad[i] * inv;
      double* dst = gx.data() + i * hw;
      for (std::size_t j = 0; j < hw; ++j) dst[j] += g;
    }
  });
  return out;
}

Tensor broadcast_to(const Tensor& x, Shape target) {
  check_defined("broadcast", {&x});
  const Shape& s = x.shape();
  if (s.size() > target.size()) {
    shape_fail("broadcast", "cannot broadcast " + shape_str(s) + " to " + shape_str(target));
  }
  // Input strides aligned to the target's trailing axes; 0 where expanded.
  std::vector<std::size_t> istride(target.size(), 0);
  std::size_t stride = 1;
  const std::size_t offset = target.size() - s.size();
  for (std::size_t d = s.size(); d-- > 0;) {
    const std::size_t td = offset + d;
    if (s[d] == target[td]) {
      istride[td] = (s[d] == 1) ? 0 : stride;
    } else if (s[d] == 1) {
      istride[td] = 0;
    } else {
      shape_fail("broadcast", "cannot broadcast " + shape_str(s) + " to " + shape_str(target));
    }
    stride *= s[d];
  }
  Tensor out = Tensor::zeros(target);
  const auto xv = x.value();
  auto ov = out.value_mut();
  for_each_mapped(target, istride, [&](std::size_t oi, std::size_t ii) { ov[oi] = xv[ii]; });
  finish({&x}, out, [xn = x.node(), on = out.node(), target = out.shape(), istride] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    for_each_mapped(target, istride, [&](std::size_t oi, std::size_t ii) { gx[ii] += g[oi]; });
  });
  return out;
}

Tensor reshape(const Tensor& x, Shape target) {
  check_defined("reshape", {&x});
  if (shape_numel(target) != x.size()) {
    shape_fail("reshape", "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(target));
  }
  Tensor out = Tensor::from_data(std::move(target),
                                 std::vector<double>(x.value().begin(), x.value().end()));
  finish({&x}, out, [xn = x.node(), on = out.node()] {
    if (!xn->requires_grad) return;
    kernels::active().axpy(1.0, on->grad.data(), grad_buffer(*xn).data(), on->grad.size());
  });
  return out;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCategory::shape, "concatenate: no operands");
  for (const Tensor& t : parts) check_defined("concatenate", {&t});
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    shape_fail("concatenate", "axis " + std::to_string(axis) + " out of range for shape " +
                                  shape_str(first));
  }
  std::size_t total_extent = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    if (s.size() != first.size()) {
      shape_fail("concatenate", "rank mismatch: " + shape_str(first) + " vs " + shape_str(s));
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        shape_fail("concatenate", "shapes " + shape_str(first) + " and " + shape_str(s) +
                                      " differ off the concat axis");
      }
    }
    total_extent += s[axis];
  }
  Shape oshape = first;
  oshape[axis] = total_extent;
  Tensor out = Tensor::zeros(oshape);
  const AxisSplit sp = split_axis(oshape, axis);

  auto offsets = std::make_shared<std::vector<std::size_t>>();
  std::size_t off = 0;
  auto ov = out.value_mut();
  for (const Tensor& t : parts) {
    offsets->push_back(off);
    const std::size_t ext = t.shape()[axis];
    const auto tv = t.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = tv.data() + o * ext * sp.inner;
      double* dst = ov.data() + (o * total_extent + off) * sp.inner;
      std::copy(src, src + ext * sp.inner, dst);
    }
    off += ext;
  }

  std::vector<NodePtr> nodes;
  bool rg = false;
  for (const Tensor& t : parts) {
    nodes.push_back(t.node());
    rg = rg || t.requires_grad();
  }
  out.node()->requires_grad = rg;
  Tape* tape = Tape::active();
  if (tape && rg) {
    out.node()->producer = tape;
    auto on = out.node();
    auto ins = nodes;
    tape->record(std::move(nodes), on, [ins, on, offsets, sp, total_extent] {
      const auto& g = on->grad;
      for (std::size_t p = 0; p < ins.size(); ++p) {
        if (!ins[p]->requires_grad) continue;
        auto& gx = grad_buffer(*ins[p]);
        const std::size_t part_extent = gx.size() / (sp.outer * sp.inner);
        const std::size_t off = (*offsets)[p];
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = g.data() + (o * total_extent + off) * sp.inner;
          double* dst = gx.data() + o * part_extent * sp.inner;
          for (std::size_t i = 0; i < part_extent * sp.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
  check_defined("slice", {&x});
  if (axis >= x.rank() || len == 0 || start + len > x.shape()[axis]) {
    shape_fail("slice", "range [" + std::to_string(start) + "," + std::to_string(start + len) +
                            ") on axis " + std::to_string(axis) + " invalid for shape " +
                            shape_str(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  Shape oshape = x.shape();
  oshape[axis] = len;
  Tensor out = Tensor::zeros(oshape);
  const auto xv = x.value();
  auto ov = out.value_mut();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* src = xv.data() + (o * sp.extent + start) * sp.inner;
    std::copy(src, src + len * sp.inner, ov.data() + o * len * sp.inner);
  }
  finish({&x}, out, [xn = x.node(), on = out.node(), sp, start, len] {
    if (!xn->requires_grad) return;
    auto& gx = grad_buffer(*xn);
    const auto& g = on->grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = g.data() + o * len * sp.inner;
      double* dst = gx.data() + (o * sp.extent + start) * sp.inner;
      for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
    }
  });
  return out;
}

}  // namespace mixcam::ops
