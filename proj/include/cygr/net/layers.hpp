#pragma once

#include <deque>
#include <string>
#include <vector>

#include "cygr/core/param.hpp"
#include "cygr/core/random.hpp"

namespace cygr::net {

/// Owns parameters with stable addresses and deterministic, name-keyed
/// initialization streams (construction order does not matter).
class ParamRegistry {
 public:
  explicit ParamRegistry(uint64_t seed) : seed_(seed) {}

  Parameter* add(const std::string& name, Shape shape, std::vector<double> init);
  /// Uniform(-bound, bound) initialization from the stream keyed by `name`.
  Parameter* add_uniform(const std::string& name, Shape shape, double bound);
  Parameter* add_constant(const std::string& name, Shape shape, double value);

  Parameter* find(const std::string& name);
  std::vector<Parameter*> all();            // insertion order
  std::vector<Parameter*> with_prefix(const std::string& prefix);
  uint64_t seed() const { return seed_; }

  /// Named non-trainable state (e.g. normalization running statistics);
  /// saved and restored alongside the parameters.
  std::vector<double>* add_buffer(const std::string& name, int64_t size, double init);
  std::vector<double>* find_buffer(const std::string& name);
  std::vector<std::pair<std::string, std::vector<double>*>> buffers();

 private:
  std::deque<Parameter> params_;  // deque: pointers stay valid
  std::deque<std::pair<std::string, std::vector<double>>> buffers_;
  uint64_t seed_;
};

struct Linear {
  Parameter* weight = nullptr;  // [in, out]; rows act on row vectors x W
  Parameter* bias = nullptr;

  Linear() = default;
  Linear(ParamRegistry& reg, const std::string& name, int64_t in, int64_t out);
  Array operator()(const Array& x) const;
  int64_t out_dim() const { return weight->shape[1]; }
};

/// Batch normalization over the leading (batch) axis of [B,F] inputs.
/// Training mode normalizes with batch statistics and updates running
/// estimates; eval mode applies the running estimates as constants, which
/// also makes per-sample input gradients well-defined (used by the critic
/// gradient penalty).
struct BatchNorm1d {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  std::vector<double>* running_mean = nullptr;  // registry-owned buffers
  std::vector<double>* running_var = nullptr;
  double momentum = 0.1, eps = 1e-5;

  BatchNorm1d() = default;
  BatchNorm1d(ParamRegistry& reg, const std::string& name, int64_t features);
  Array operator()(const Array& x, bool training);
  /// Per-feature d(output)/d(input) in eval mode, as a graph over gamma.
  Array eval_slope() const;
};

/// Batch normalization over (batch, height, width) of [B,C,H,W] inputs.
struct BatchNorm2d {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  std::vector<double>* running_mean = nullptr;
  std::vector<double>* running_var = nullptr;
  double momentum = 0.1, eps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(ParamRegistry& reg, const std::string& name, int64_t channels);
  Array operator()(const Array& x, bool training);
};

struct Conv2dLayer {
  Parameter* weight = nullptr;  // [OC,IC,kh,kw]
  Parameter* bias = nullptr;    // [OC]
  int stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamRegistry& reg, const std::string& name, int64_t in_ch, int64_t out_ch,
              int kernel, int stride, int pad);
  Array operator()(const Array& x) const;
};

/// Transposed convolution; weight layout [IC,OC,kh,kw] so it is the exact
/// adjoint of a conv2d with that weight.
struct ConvTranspose2dLayer {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;  // [OC]
  int stride = 2, pad = 1;

  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(ParamRegistry& reg, const std::string& name, int64_t in_ch, int64_t out_ch,
                       int kernel, int stride, int pad);
  Array operator()(const Array& x) const;
};

/// Multilayer perceptron in the "hidden LBA blocks then linear" idiom:
/// each hidden layer is Linear + BatchNorm + ELU; the output layer is
/// linear, optionally followed by its own BatchNorm + ELU.
struct Mlp {
  std::vector<Linear> hidden;
  std::vector<BatchNorm1d> hidden_bn;
  Linear out;
  BatchNorm1d out_bn;
  bool trailing_ba = false;

  Mlp() = default;
  Mlp(ParamRegistry& reg, const std::string& name, int64_t in,
      const std::vector<int64_t>& hidden_widths, int64_t out_width, bool trailing_ba = false);
  Array operator()(const Array& x, bool training);
};

/// d(elu)/dz as a differentiable graph: 1 for z > 0, exp(z) below.
Array elu_gradient(const Array& z);

/// Per-sample L2 norm over all trailing axes: [B,...] -> [B].
Array rows_norm(const Array& x);

}  // namespace cygr::net
