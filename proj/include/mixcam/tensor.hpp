#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mixcam/error.hpp"

namespace mixcam {

// Dense row-major extents. Rank 0 denotes a scalar (numel 1).
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

class Tape;

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches this node
  bool requires_grad = false;
  const Tape* producer = nullptr;  // tape that recorded this node as an output
};

using NodePtr = std::shared_ptr<TensorNode>;

// Lazily allocates a zero grad buffer and returns it.
std::vector<double>& grad_buffer(TensorNode& n);

}  // namespace detail

// Shared handle to a dense double tensor. Copies are shallow: they alias the
// same storage and gradient, which is what parameter sharing in a computation
// graph needs. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape s, bool requires_grad = false);
  static Tensor full(Shape s, double v, bool requires_grad = false);
  static Tensor from_data(Shape s, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  std::span<const double> value() const;
  std::span<double> value_mut();
  double item() const;  // errors unless size() == 1

  bool has_grad() const;
  std::span<const double> grad() const;  // errors when no grad is populated
  void zero_grad();

  Tensor clone() const;

  detail::NodePtr node() const { return node_; }
  static Tensor wrap(detail::NodePtr n);

 private:
  detail::NodePtr node_;
};

// Define-by-run gradient tape. Constructing a Tape makes it the active tape
// for the current thread (nestable, LIFO); ops record onto the active tape
// whenever an input requires gradients. One backward pass consumes the tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept;

  void record(std::vector<detail::NodePtr> inputs, detail::NodePtr output,
              std::function<void()> vjp);

  // Seeds d(root)/d(root) = 1 and replays the tape in reverse topological
  // order. Gradients accumulate additively across all uses of a tensor.
  void backward(const Tensor& root);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::vector<detail::NodePtr> inputs;
    detail::NodePtr output;
    std::function<void()> vjp;
  };

  std::vector<Entry> entries_;
  bool consumed_ = false;
  Tape* prev_ = nullptr;
};

}  // namespace mixcam
