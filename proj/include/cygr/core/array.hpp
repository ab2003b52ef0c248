#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cygr {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense real array, optionally tracked on the ambient recording tape.
/// Data is shared and treated as immutable once an op has produced it.
class Array {
 public:
  Array() = default;
  Array(Shape shape, std::shared_ptr<std::vector<double>> data, int node)
      : shape_(std::move(shape)), data_(std::move(data)), node_(node) {}

  static Array constant(Shape shape, std::vector<double> values);
  static Array full(Shape shape, double value);
  static Array zeros(Shape shape) { return full(std::move(shape), 0.0); }
  static Array scalar(double v) { return constant({1}, {v}); }
  /// Differentiable leaf on the current tape.
  static Array leaf(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_ ? data_->size() : 0); }
  int64_t dim(int i) const { return shape_.at(i); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<double>& data() const { return *data_; }
  const std::shared_ptr<std::vector<double>>& data_ptr() const { return data_; }
  double item() const;
  double at(int64_t i) const { return (*data_)[i]; }

  int node() const { return node_; }
  bool tracked() const { return node_ >= 0; }
  /// Same values, no gradient flow.
  Array detach() const { return Array(shape_, data_, -1); }
  Array reshape(Shape s) const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  int node_ = -1;
};

/// One recorded primitive application. `backward` accumulates into the
/// gradient buffers of parent nodes, given this node's output gradient.
struct TapeNode {
  Shape shape;
  std::vector<int> parents;
  std::function<void(const std::vector<double>& grad_out)> backward;
  std::vector<double> grad;  // lazily allocated
};

/// Topologically ordered record of primitive operations. Construction order
/// is the topological order, so backward is a single reverse sweep.
class Tape {
 public:
  int push(Shape shape, std::vector<int> parents,
           std::function<void(const std::vector<double>&)> backward);
  TapeNode& node(int id) { return nodes_[id]; }
  std::vector<double>& grad_buffer(int id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  /// Reverse sweep from a scalar root; every requires-grad leaf reachable
  /// from it receives d(root)/d(leaf).
  void backward(const Array& root);

  const std::vector<double>& grad_of(const Array& a) const;
  void clear();
  size_t size() const { return nodes_.size(); }
  uint64_t epoch() const { return epoch_; }

  bool recording = true;

 private:
  std::vector<TapeNode> nodes_;
  uint64_t epoch_ = 1;
};

Tape& tape();

/// Clears the ambient tape on entry and exit.
struct GraphScope {
  GraphScope() { tape().clear(); }
  ~GraphScope() { tape().clear(); }
  GraphScope(const GraphScope&) = delete;
};

namespace ops {

// elementwise with numpy-style broadcasting
Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array div(const Array& a, const Array& b);
Array neg(const Array& a);
Array scale(const Array& a, double c);
Array add_scalar(const Array& a, double c);

Array exp(const Array& a);
Array log(const Array& a);
Array sqrt(const Array& a);
Array square(const Array& a);
Array abs(const Array& a);
Array tanh(const Array& a);
Array sigmoid(const Array& a);
Array relu(const Array& a);
Array leaky_relu(const Array& a, double slope);
Array elu(const Array& a);
Array sin(const Array& a);
Array cos(const Array& a);
/// arccos with the input clamped to [-1+1e-7, 1-1e-7]; gradient is zero
/// in the clamped region.
Array arccos(const Array& a);

Array sum(const Array& a);
Array mean(const Array& a);
/// Reduce over the axes listed in `axes` (each kept as extent 1).
Array sum_axes(const Array& a, const std::vector<int>& axes);
Array mean_axes(const Array& a, const std::vector<int>& axes);

Array matmul(const Array& a, const Array& b);
Array transpose(const Array& a);

struct ReduceResult {
  Array values;
  std::vector<int64_t> indices;
};
/// Min/max over one axis of a 2D array with argmin/argmax; the subgradient
/// goes to the selected element, ties broken by lowest index.
ReduceResult min_reduce(const Array& a, int axis);
ReduceResult max_reduce(const Array& a, int axis);

Array softmax_rows(const Array& a);

/// Sorts every column ascending; backward scatters through the saved
/// permutation.
Array sort_columns(const Array& a);

Array concat_rows(const std::vector<Array>& parts);
Array concat_cols(const std::vector<Array>& parts);
/// k arrays of shape [n] -> [n, k]
Array stack_cols(const std::vector<Array>& cols);
Array slice_cols(const Array& a, int64_t begin, int64_t end);
Array slice_rows(const Array& a, int64_t begin, int64_t end);
Array gather_rows(const Array& a, const std::vector<int64_t>& idx);

/// img [C,H,W], coords [N,2] as (x,y) in pixel units; border-clamped
/// bilinear interpolation, differentiable in both img and coords.
Array bilinear_gather(const Array& img, const Array& coords);

Array conv2d(const Array& x, const Array& w, const Array& b, int stride, int pad);
/// Adjoint of conv2d; `output_pad` extends the output so that strided
/// shapes round-trip exactly.
Array conv2d_transpose(const Array& x, const Array& w, int stride, int pad, int output_pad = 0);
Array avgpool2(const Array& x);
Array upsample2_nearest(const Array& x);

}  // namespace ops

void backward(const Array& root);

}  // namespace cygr
