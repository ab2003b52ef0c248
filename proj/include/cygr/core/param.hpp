#pragma once

#include <cmath>
#include <string>

#include "cygr/core/array.hpp"

namespace cygr {

/// Trainable tensor. Values persist across graphs; `use()` registers the
/// parameter as a leaf on the current tape (once per graph), `frozen()`
/// exposes the values as a constant so gradients flow through computations
/// that use the parameter but never into it.
struct Parameter {
  std::string name;
  Shape shape;
  std::shared_ptr<std::vector<double>> value;
  std::vector<double> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Shape s, std::vector<double> init)
      : name(std::move(n)),
        shape(std::move(s)),
        value(std::make_shared<std::vector<double>>(std::move(init))),
        grad(value->size(), 0.0) {
    if (numel(shape) != static_cast<int64_t>(value->size()))
      throw std::invalid_argument("parameter " + name + ": bad init size");
  }

  int64_t size() const { return static_cast<int64_t>(value->size()); }
  double* data() { return value->data(); }
  const double* data() const { return value->data(); }

  Array use() {
    if (!trainable) return frozen();
    Tape& t = tape();
    if (epoch_ != t.epoch() || node_ < 0) {
      node_ = t.push(shape, {}, nullptr);
      epoch_ = t.epoch();
    }
    return Array(shape, value, node_);
  }

  Array frozen() const { return Array(shape, value, -1); }

  /// True if the last backward sweep on the current graph reached this
  /// parameter (a gradient buffer exists, even if numerically zero).
  bool grad_on_tape() const {
    Tape& t = tape();
    return epoch_ == t.epoch() && node_ >= 0 && t.has_grad(node_);
  }

  /// Adds this graph's gradient into `grad`. Call after backward().
  void accumulate_from_tape() {
    Tape& t = tape();
    if (epoch_ != t.epoch() || node_ < 0 || !t.has_grad(node_)) return;
    const std::vector<double>& g = t.node(node_).grad;
    for (size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

 private:
  uint64_t epoch_ = 0;
  int node_ = -1;
};

/// Adam over a parameter group, with optional decoupled L2 weight decay
/// (added to the gradient) and global-norm gradient clipping.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2,
       double weight_decay = 0.0, double clip_norm = 0.0, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2),
        wd_(weight_decay), clip_(clip_norm), eps_(eps) {
    for (Parameter* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void collect_grads() {
    for (Parameter* p : params_) p->accumulate_from_tape();
  }

  void step() {
    ++t_;
    if (wd_ != 0.0)
      for (Parameter* p : params_)
        for (int64_t i = 0; i < p->size(); ++i) p->grad[i] += wd_ * p->data()[i];
    if (clip_ > 0.0) {
      double sq = 0.0;
      for (Parameter* p : params_)
        for (double g : p->grad) sq += g * g;
      double norm = std::sqrt(sq);
      if (norm > clip_) {
        double s = clip_ / norm;
        for (Parameter* p : params_)
          for (double& g : p->grad) g *= s;
      }
    }
    double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (size_t k = 0; k < params_.size(); ++k) {
      Parameter* p = params_[k];
      for (int64_t i = 0; i < p->size(); ++i) {
        double g = p->grad[i];
        m_[k][i] = b1_ * m_[k][i] + (1 - b1_) * g;
        v_[k][i] = b2_ * v_[k][i] + (1 - b2_) * g * g;
        p->data()[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
  }

  const std::vector<Parameter*>& params() const { return params_; }
  std::vector<std::vector<double>>& moment1() { return m_; }
  std::vector<std::vector<double>>& moment2() { return v_; }
  uint64_t& step_count() { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, wd_ = 0.0, clip_ = 0.0, eps_ = 1e-8;
  uint64_t t_ = 0;
};

}  // namespace cygr
