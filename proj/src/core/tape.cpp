#include "cygr/core/array.hpp"

#include <numeric>

namespace cygr {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Array Array::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("constant: shape " + shape_str(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  return Array(std::move(shape), std::make_shared<std::vector<double>>(std::move(values)), -1);
}

Array Array::full(Shape shape, double value) {
  auto data = std::make_shared<std::vector<double>>(numel(shape), value);
  return Array(std::move(shape), std::move(data), -1);
}

Array Array::leaf(Shape shape, std::vector<double> values) {
  Array c = constant(std::move(shape), std::move(values));
  if (!tape().recording) return c;
  int id = tape().push(c.shape(), {}, nullptr);
  return Array(c.shape(), c.data_ptr(), id);
}

double Array::item() const {
  if (size() != 1) throw std::logic_error("item() on non-scalar " + shape_str(shape_));
  return (*data_)[0];
}

Array Array::reshape(Shape s) const {
  if (numel(s) != size())
    throw std::invalid_argument("reshape: " + shape_str(shape_) + " -> " + shape_str(s));
  if (node_ < 0) return Array(std::move(s), data_, -1);
  // alias node: same buffer, identity backward
  Tape& t = tape();
  int parent = node_;
  int id = t.push(s, {parent}, [parent, &t](const std::vector<double>& g) {
    std::vector<double>& pg = t.grad_buffer(parent);
    for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
  return Array(std::move(s), data_, id);
}

int Tape::push(Shape shape, std::vector<int> parents,
               std::function<void(const std::vector<double>&)> backward) {
  TapeNode n;
  n.shape = std::move(shape);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buffer(int id) {
  TapeNode& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(numel(n.shape), 0.0);
  return n.grad;
}

void Tape::backward(const Array& root) {
  if (root.size() != 1) throw std::logic_error("backward: root must be scalar");
  if (!root.tracked()) throw std::logic_error("backward: root is not on the tape");
  grad_buffer(root.node())[0] = 1.0;
  for (int id = root.node(); id >= 0; --id) {
    TapeNode& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n.grad);
  }
}

const std::vector<double>& Tape::grad_of(const Array& a) const {
  static const std::vector<double> empty;
  if (!a.tracked()) return empty;
  const TapeNode& n = nodes_[a.node()];
  return n.grad.empty() ? empty : n.grad;
}

void Tape::clear() {
  nodes_.clear();
  ++epoch_;
}

Tape& tape() {
  thread_local Tape t;
  return t;
}

void backward(const Array& root) { tape().backward(root); }

}  // namespace cygr
