#include "mixcam/adam.hpp"

#include <cmath>

#include "mixcam/kernels.hpp"

namespace mixcam {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& [name, p] : params_) {
    if (!p.defined()) fail(ErrorCategory::state, "adam: undefined parameter '" + name + "'");
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step() {
  for (auto& [name, p] : params_) {
    if (!p.has_grad()) {
      fail(ErrorCategory::state, "adam_step: missing gradient on parameter '" + name + "'");
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    kernels::active().adam_update(p.value_mut().data(), m_[i].value_mut().data(),
                                  v_[i].value_mut().data(), p.grad().data(), p.size(),
                                  cfg_.learning_rate, cfg_.beta1, cfg_.beta2, cfg_.epsilon,
                                  cfg_.weight_decay, bc1, bc2);
  }
}

std::size_t Adam::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].first == name) return i;
  }
  fail(ErrorCategory::state, "adam: unknown parameter '" + name + "'");
}

Tensor Adam::moment1(const std::string& name) const { return m_[index_of(name)]; }
Tensor Adam::moment2(const std::string& name) const { return v_[index_of(name)]; }

void Adam::set_moment1(const std::string& name, const Tensor& m) {
  const std::size_t i = index_of(name);
  if (!same_shape(m.shape(), m_[i].shape())) {
    fail(ErrorCategory::shape, "adam: moment shape " + shape_str(m.shape()) +
                                   " does not match parameter '" + name + "' " +
                                   shape_str(m_[i].shape()));
  }
  m_[i] = m.clone();
}

void Adam::set_moment2(const std::string& name, const Tensor& m) {
  const std::size_t i = index_of(name);
  if (!same_shape(m.shape(), v_[i].shape())) {
    fail(ErrorCategory::shape, "adam: moment shape " + shape_str(m.shape()) +
                                   " does not match parameter '" + name + "' " +
                                   shape_str(v_[i].shape()));
  }
  v_[i] = m.clone();
}

}  // namespace mixcam
