#include "cygr/net/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace cygr::net {

using namespace ops;

Parameter* ParamRegistry::add(const std::string& name, Shape shape, std::vector<double> init) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.emplace_back(name, std::move(shape), std::move(init));
  return &params_.back();
}

Parameter* ParamRegistry::add_uniform(const std::string& name, Shape shape, double bound) {
  Rng rng(seed_, "init/" + name);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return add(name, std::move(shape), std::move(v));
}

Parameter* ParamRegistry::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, std::move(shape), std::vector<double>(numel(shape), value));
}

Parameter* ParamRegistry::find(const std::string& name) {
  for (Parameter& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<Parameter*> ParamRegistry::all() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParamRegistry::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (Parameter& p : params_)
    if (p.name.rfind(prefix, 0) == 0) out.push_back(&p);
  return out;
}

std::vector<double>* ParamRegistry::add_buffer(const std::string& name, int64_t size,
                                               double init) {
  if (find_buffer(name)) throw std::invalid_argument("duplicate buffer name: " + name);
  buffers_.emplace_back(name, std::vector<double>(size, init));
  return &buffers_.back().second;
}

std::vector<double>* ParamRegistry::find_buffer(const std::string& name) {
  for (auto& [n, v] : buffers_)
    if (n == name) return &v;
  return nullptr;
}

std::vector<std::pair<std::string, std::vector<double>*>> ParamRegistry::buffers() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (auto& [n, v] : buffers_) out.emplace_back(n, &v);
  return out;
}

Linear::Linear(ParamRegistry& reg, const std::string& name, int64_t in, int64_t out) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = reg.add_uniform(name + ".w", {in, out}, bound);
  bias = reg.add_uniform(name + ".b", {out}, bound);
}

Array Linear::operator()(const Array& x) const {
  return add(matmul(x, weight->use()), bias->use());
}

BatchNorm1d::BatchNorm1d(ParamRegistry& reg, const std::string& name, int64_t features) {
  gamma = reg.add_constant(name + ".g", {features}, 1.0);
  beta = reg.add_constant(name + ".o", {features}, 0.0);
  running_mean = reg.add_buffer(name + ".rm", features, 0.0);
  running_var = reg.add_buffer(name + ".rv", features, 1.0);
}

Array BatchNorm1d::operator()(const Array& x, bool training) {
  int64_t F = gamma->shape[0];
  if (x.ndim() != 2 || x.dim(1) != F) throw std::invalid_argument("batchnorm1d: bad input");
  Array xhat;
  if (training) {
    Array mu = mean_axes(x, {0});
    Array var = mean_axes(square(sub(x, mu)), {0});
    for (int64_t i = 0; i < F; ++i) {
      (*running_mean)[i] = (1 - momentum) * (*running_mean)[i] + momentum * mu.at(i);
      (*running_var)[i] = (1 - momentum) * (*running_var)[i] + momentum * var.at(i);
    }
    xhat = div(sub(x, mu), sqrt(add_scalar(var, eps)));
  } else {
    std::vector<double> inv(F);
    for (int64_t i = 0; i < F; ++i) inv[i] = 1.0 / std::sqrt((*running_var)[i] + eps);
    xhat = mul(sub(x, Array::constant({1, F}, *running_mean)),
               Array::constant({1, F}, inv));
  }
  return add(mul(xhat, gamma->use().reshape({1, F})), beta->use().reshape({1, F}));
}

Array BatchNorm1d::eval_slope() const {
  int64_t F = gamma->shape[0];
  std::vector<double> inv(F);
  for (int64_t i = 0; i < F; ++i) inv[i] = 1.0 / std::sqrt((*running_var)[i] + eps);
  return mul(gamma->use().reshape({1, F}), Array::constant({1, F}, inv));
}

BatchNorm2d::BatchNorm2d(ParamRegistry& reg, const std::string& name, int64_t channels) {
  gamma = reg.add_constant(name + ".g", {channels}, 1.0);
  beta = reg.add_constant(name + ".o", {channels}, 0.0);
  running_mean = reg.add_buffer(name + ".rm", channels, 0.0);
  running_var = reg.add_buffer(name + ".rv", channels, 1.0);
}

Array BatchNorm2d::operator()(const Array& x, bool training) {
  int64_t C = gamma->shape[0];
  if (x.ndim() != 4 || x.dim(1) != C) throw std::invalid_argument("batchnorm2d: bad input");
  Array xhat;
  if (training) {
    Array mu = mean_axes(x, {0, 2, 3});
    Array var = mean_axes(square(sub(x, mu)), {0, 2, 3});
    for (int64_t i = 0; i < C; ++i) {
      (*running_mean)[i] = (1 - momentum) * (*running_mean)[i] + momentum * mu.at(i);
      (*running_var)[i] = (1 - momentum) * (*running_var)[i] + momentum * var.at(i);
    }
    xhat = div(sub(x, mu), sqrt(add_scalar(var, eps)));
  } else {
    std::vector<double> inv(C);
    for (int64_t i = 0; i < C; ++i) inv[i] = 1.0 / std::sqrt((*running_var)[i] + eps);
    xhat = mul(sub(x, Array::constant({1, C, 1, 1}, *running_mean)),
               Array::constant({1, C, 1, 1}, inv));
  }
  return add(mul(xhat, gamma->use().reshape({1, C, 1, 1})),
             beta->use().reshape({1, C, 1, 1}));
}

Conv2dLayer::Conv2dLayer(ParamRegistry& reg, const std::string& name, int64_t in_ch,
                         int64_t out_ch, int kernel, int stride_, int pad_)
    : stride(stride_), pad(pad_) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
  weight = reg.add_uniform(name + ".w", {out_ch, in_ch, kernel, kernel}, bound);
  bias = reg.add_uniform(name + ".b", {out_ch}, bound);
}

Array Conv2dLayer::operator()(const Array& x) const {
  return conv2d(x, weight->use(), bias->use(), stride, pad);
}

ConvTranspose2dLayer::ConvTranspose2dLayer(ParamRegistry& reg, const std::string& name,
                                           int64_t in_ch, int64_t out_ch, int kernel, int stride_,
                                           int pad_)
    : stride(stride_), pad(pad_) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
  weight = reg.add_uniform(name + ".w", {in_ch, out_ch, kernel, kernel}, bound);
  bias = reg.add_uniform(name + ".b", {out_ch}, bound);
}

Array ConvTranspose2dLayer::operator()(const Array& x) const {
  Array y = conv2d_transpose(x, weight->use(), stride, pad);
  int64_t OC = bias->shape[0];
  return add(y, bias->use().reshape({1, OC, 1, 1}));
}

Mlp::Mlp(ParamRegistry& reg, const std::string& name, int64_t in,
         const std::vector<int64_t>& hidden_widths, int64_t out_width, bool trailing)
    : trailing_ba(trailing) {
  int64_t cur = in;
  for (size_t i = 0; i < hidden_widths.size(); ++i) {
    std::string ln = name + ".h" + std::to_string(i);
    hidden.emplace_back(reg, ln, cur, hidden_widths[i]);
    hidden_bn.emplace_back(reg, ln + ".bn", hidden_widths[i]);
    cur = hidden_widths[i];
  }
  out = Linear(reg, name + ".out", cur, out_width);
  if (trailing_ba) out_bn = BatchNorm1d(reg, name + ".out.bn", out_width);
}

Array Mlp::operator()(const Array& x, bool training) {
  Array h = x;
  for (size_t i = 0; i < hidden.size(); ++i)
    h = elu(hidden_bn[i](hidden[i](h), training));
  h = out(h);
  if (trailing_ba) h = elu(out_bn(h, training));
  return h;
}

Array elu_gradient(const Array& z) { return ops::exp(neg(relu(neg(z)))); }

Array rows_norm(const Array& x) {
  std::vector<int> axes;
  for (int i = 1; i < static_cast<int>(x.ndim()); ++i) axes.push_back(i);
  Array s = sum_axes(square(x), axes);
  return sqrt(add_scalar(s, 1e-12)).reshape({x.dim(0)});
}

}  // namespace cygr::net
