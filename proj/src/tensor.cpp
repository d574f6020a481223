#include "mixcam/tensor.hpp"

#include <sstream>
#include <utility>

namespace mixcam {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace detail {

std::vector<double>& grad_buffer(TensorNode& n) {
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

}  // namespace detail

Tensor Tensor::zeros(Shape s, bool requires_grad) {
  auto n = std::make_shared<detail::TensorNode>();
  n->value.assign(shape_numel(s), 0.0);
  n->shape = std::move(s);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::full(Shape s, double v, bool requires_grad) {
  Tensor t = zeros(std::move(s), requires_grad);
  for (double& x : t.node()->value) x = v;
  return t;
}

Tensor Tensor::from_data(Shape s, std::vector<double> data, bool requires_grad) {
  if (data.size() != shape_numel(s)) {
    fail(ErrorCategory::shape, "tensor: data length " + std::to_string(data.size()) +
                                   " does not match shape " + shape_str(s));
  }
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = std::move(s);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data(Shape{}, {v}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) fail(ErrorCategory::state, "tensor: undefined handle");
  return node_->shape;
}

std::size_t Tensor::size() const {
  if (!node_) fail(ErrorCategory::state, "tensor: undefined handle");
  return node_->value.size();
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  if (!node_) fail(ErrorCategory::state, "tensor: undefined handle");
  node_->requires_grad = rg;
}

std::span<const double> Tensor::value() const {
  if (!node_) fail(ErrorCategory::state, "tensor: undefined handle");
  return node_->value;
}

std::span<double> Tensor::value_mut() {
  if (!node_) fail(ErrorCategory::state, "tensor: undefined handle");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    fail(ErrorCategory::shape, "tensor: item() requires a scalar, got shape " + shape_str(shape()));
  }
  return node_->value[0];
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) fail(ErrorCategory::state, "tensor: gradient not populated");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::clone() const {
  if (!node_) return Tensor();
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = node_->shape;
  n->value = node_->value;
  n->requires_grad = node_->requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::wrap(detail::NodePtr n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

namespace {
thread_local Tape* t_active = nullptr;
}

Tape::Tape() : prev_(t_active) { t_active = this; }

Tape::~Tape() { t_active = prev_; }

Tape* Tape::active() noexcept { return t_active; }

void Tape::record(std::vector<detail::NodePtr> inputs, detail::NodePtr output,
                  std::function<void()> vjp) {
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(vjp)});
}

void Tape::backward(const Tensor& root) {
  if (consumed_) fail(ErrorCategory::state, "backward: tape already consumed");
  if (!root.defined() || root.size() != 1) {
    fail(ErrorCategory::shape, "backward: root must be a scalar, got " +
                                   (root.defined() ? shape_str(root.shape()) : "undefined"));
  }
  auto rn = root.node();
  if (rn->producer != this) {
    fail(ErrorCategory::state, "backward: root was not produced on the current tape");
  }
  consumed_ = true;
  rn->grad.assign(1, 1.0);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not an ancestor of the root
    it->vjp();
  }
}

}  // namespace mixcam
