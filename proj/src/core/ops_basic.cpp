#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "cygr/core/array.hpp"

namespace cygr::ops {
namespace {

using MatC = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using Mat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::shared_ptr<std::vector<double>> alloc(int64_t n) {
  return std::make_shared<std::vector<double>>(n);
}

bool track(const Array& a) { return a.tracked() && tape().recording; }

// numpy-style broadcast layout: right-aligned shapes, stride 0 on extent-1 dims
struct Bcast {
  Shape out;
  std::vector<int64_t> sa, sb;  // strides of a and b over the out index space
  int64_t n = 0;
};

Bcast broadcast_layout(const Shape& a, const Shape& b) {
  size_t nd = std::max(a.size(), b.size());
  Shape ar(nd, 1), br(nd, 1);
  std::copy(a.begin(), a.end(), ar.begin() + (nd - a.size()));
  std::copy(b.begin(), b.end(), br.begin() + (nd - b.size()));
  Bcast r;
  r.out.resize(nd);
  for (size_t i = 0; i < nd; ++i) {
    if (ar[i] != br[i] && ar[i] != 1 && br[i] != 1)
      throw std::invalid_argument("broadcast: " + shape_str(a) + " vs " + shape_str(b));
    r.out[i] = std::max(ar[i], br[i]);
  }
  r.sa.assign(nd, 0);
  r.sb.assign(nd, 0);
  int64_t pa = 1, pb = 1;
  for (int i = static_cast<int>(nd) - 1; i >= 0; --i) {
    r.sa[i] = (ar[i] == 1) ? 0 : pa;
    r.sb[i] = (br[i] == 1) ? 0 : pb;
    pa *= ar[i];
    pb *= br[i];
  }
  r.n = numel(r.out);
  return r;
}

// visit(out_linear, a_offset, b_offset)
template <class F>
void bcast_iterate(const Bcast& bc, F&& visit) {
  size_t nd = bc.out.size();
  std::vector<int64_t> idx(nd, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t i = 0; i < bc.n; ++i) {
    visit(i, oa, ob);
    for (int d = static_cast<int>(nd) - 1; d >= 0; --d) {
      ++idx[d];
      oa += bc.sa[d];
      ob += bc.sb[d];
      if (idx[d] < bc.out[d]) break;
      oa -= bc.sa[d] * bc.out[d];
      ob -= bc.sb[d] * bc.out[d];
      idx[d] = 0;
    }
  }
}

enum class BinKind { Add, Sub, Mul, Div };

Array binary(const Array& a, const Array& b, BinKind kind) {
  Bcast bc = broadcast_layout(a.shape(), b.shape());
  auto out = alloc(bc.n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out->data();
  if (bc.sa == bc.sb && a.shape() == b.shape()) {  // fast path
    switch (kind) {
      case BinKind::Add: for (int64_t i = 0; i < bc.n; ++i) po[i] = pa[i] + pb[i]; break;
      case BinKind::Sub: for (int64_t i = 0; i < bc.n; ++i) po[i] = pa[i] - pb[i]; break;
      case BinKind::Mul: for (int64_t i = 0; i < bc.n; ++i) po[i] = pa[i] * pb[i]; break;
      case BinKind::Div: for (int64_t i = 0; i < bc.n; ++i) po[i] = pa[i] / pb[i]; break;
    }
  } else {
    bcast_iterate(bc, [&](int64_t i, int64_t oa, int64_t ob) {
      switch (kind) {
        case BinKind::Add: po[i] = pa[oa] + pb[ob]; break;
        case BinKind::Sub: po[i] = pa[oa] - pb[ob]; break;
        case BinKind::Mul: po[i] = pa[oa] * pb[ob]; break;
        case BinKind::Div: po[i] = pa[oa] / pb[ob]; break;
      }
    });
  }
  bool ta = track(a), tb = track(b);
  if (!ta && !tb) return Array(bc.out, out, -1);

  Tape& t = tape();
  std::vector<int> parents;
  if (ta) parents.push_back(a.node());
  if (tb) parents.push_back(b.node());
  int na = ta ? a.node() : -1, nb = tb ? b.node() : -1;
  auto da = a.data_ptr();
  auto db = b.data_ptr();
  int id = t.push(bc.out, parents, [=, &t](const std::vector<double>& g) {
    const double* qa = da->data();
    const double* qb = db->data();
    std::vector<double>* ga = na >= 0 ? &t.grad_buffer(na) : nullptr;
    std::vector<double>* gb = nb >= 0 ? &t.grad_buffer(nb) : nullptr;
    bcast_iterate(bc, [&](int64_t i, int64_t oa, int64_t ob) {
      double gi = g[i];
      switch (kind) {
        case BinKind::Add:
          if (ga) (*ga)[oa] += gi;
          if (gb) (*gb)[ob] += gi;
          break;
        case BinKind::Sub:
          if (ga) (*ga)[oa] += gi;
          if (gb) (*gb)[ob] -= gi;
          break;
        case BinKind::Mul:
          if (ga) (*ga)[oa] += gi * qb[ob];
          if (gb) (*gb)[ob] += gi * qa[oa];
          break;
        case BinKind::Div: {
          double inv = 1.0 / qb[ob];
          if (ga) (*ga)[oa] += gi * inv;
          if (gb) (*gb)[ob] -= gi * qa[oa] * inv * inv;
          break;
        }
      }
    });
  });
  return Array(bc.out, out, id);
}

// fval(x) -> y; dval(x, y) -> dy/dx
template <class FV, class FD>
Array unary(const Array& a, FV&& fval, FD&& dval) {
  int64_t n = a.size();
  auto out = alloc(n);
  const double* pa = a.data().data();
  double* po = out->data();
  for (int64_t i = 0; i < n; ++i) po[i] = fval(pa[i]);
  if (!track(a)) return Array(a.shape(), out, -1);
  Tape& t = tape();
  int na = a.node();
  auto da = a.data_ptr();
  auto dout = out;
  int id = t.push(a.shape(), {na}, [=, &t, dval = std::forward<FD>(dval)](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    const double* x = da->data();
    const double* y = dout->data();
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dval(x[i], y[i]);
  });
  return Array(a.shape(), out, id);
}

}  // namespace

Array add(const Array& a, const Array& b) { return binary(a, b, BinKind::Add); }
Array sub(const Array& a, const Array& b) { return binary(a, b, BinKind::Sub); }
Array mul(const Array& a, const Array& b) { return binary(a, b, BinKind::Mul); }
Array div(const Array& a, const Array& b) { return binary(a, b, BinKind::Div); }

Array neg(const Array& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}
Array scale(const Array& a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}
Array add_scalar(const Array& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Array exp(const Array& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
Array log(const Array& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
Array sqrt(const Array& a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0 ? 0.5 / y : 0.0; });
}
Array square(const Array& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}
Array abs(const Array& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}
Array tanh(const Array& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}
Array sigmoid(const Array& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}
Array relu(const Array& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}
Array leaky_relu(const Array& a, double slope) {
  return unary(a, [slope](double x) { return x > 0 ? x : slope * x; },
               [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}
Array elu(const Array& a) {
  return unary(a, [](double x) { return x > 0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}
Array sin(const Array& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}
Array cos(const Array& a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

static constexpr double kAcosLim = 1.0 - 1e-7;

Array arccos(const Array& a) {
  return unary(
      a, [](double x) { return std::acos(std::clamp(x, -kAcosLim, kAcosLim)); },
      [](double x, double) {
        if (x <= -kAcosLim || x >= kAcosLim) return 0.0;
        return -1.0 / std::sqrt(1.0 - x * x);
      });
}

Array sum(const Array& a) {
  double s = 0;
  for (double v : a.data()) s += v;
  auto out = alloc(1);
  (*out)[0] = s;
  if (!track(a)) return Array({1}, out, -1);
  Tape& t = tape();
  int na = a.node();
  int id = t.push({1}, {na}, [na, &t](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    for (double& v : ga) v += g[0];
  });
  return Array({1}, out, id);
}

Array mean(const Array& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Array sum_axes(const Array& a, const std::vector<int>& axes) {
  Shape os = a.shape();
  int64_t count = 1;
  for (int ax : axes) {
    count *= os.at(ax);
    os[ax] = 1;
  }
  // strides of the input over its own index space
  size_t nd = a.shape().size();
  std::vector<int64_t> in_stride(nd, 1), out_stride(nd, 0);
  for (int i = static_cast<int>(nd) - 2; i >= 0; --i)
    in_stride[i] = in_stride[i + 1] * a.shape()[i + 1];
  int64_t p = 1;
  for (int i = static_cast<int>(nd) - 1; i >= 0; --i) {
    out_stride[i] = (os[i] == 1) ? 0 : p;
    p *= os[i];
  }
  int64_t n_in = a.size(), n_out = numel(os);
  auto out = alloc(n_out);
  std::fill(out->begin(), out->end(), 0.0);
  const double* pa = a.data().data();
  double* po = out->data();
  std::vector<int64_t> idx(nd, 0);
  int64_t oo = 0;
  for (int64_t i = 0; i < n_in; ++i) {
    po[oo] += pa[i];
    for (int d = static_cast<int>(nd) - 1; d >= 0; --d) {
      ++idx[d];
      oo += out_stride[d];
      if (idx[d] < a.shape()[d]) break;
      oo -= out_stride[d] * a.shape()[d];
      idx[d] = 0;
    }
  }
  if (!track(a)) return Array(os, out, -1);
  Tape& t = tape();
  int na = a.node();
  Shape in_shape = a.shape();
  int id = t.push(os, {na}, [=, &t](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    std::vector<int64_t> ix(nd, 0);
    int64_t o = 0;
    for (int64_t i = 0; i < n_in; ++i) {
      ga[i] += g[o];
      for (int d = static_cast<int>(nd) - 1; d >= 0; --d) {
        ++ix[d];
        o += out_stride[d];
        if (ix[d] < in_shape[d]) break;
        o -= out_stride[d] * in_shape[d];
        ix[d] = 0;
      }
    }
  });
  (void)count;
  return Array(os, out, id);
}

Array mean_axes(const Array& a, const std::vector<int>& axes) {
  int64_t count = 1;
  for (int ax : axes) count *= a.shape().at(ax);
  return scale(sum_axes(a, axes), 1.0 / static_cast<double>(count));
}

Array matmul(const Array& a, const Array& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  auto out = alloc(n * m);
  {
    MatC A(a.data().data(), n, k), B(b.data().data(), k, m);
    Mat C(out->data(), n, m);
    C.noalias() = A * B;
  }
  bool ta = track(a), tb = track(b);
  if (!ta && !tb) return Array({n, m}, out, -1);
  Tape& t = tape();
  std::vector<int> parents;
  if (ta) parents.push_back(a.node());
  if (tb) parents.push_back(b.node());
  int na = ta ? a.node() : -1, nb = tb ? b.node() : -1;
  auto da = a.data_ptr();
  auto db = b.data_ptr();
  int id = t.push({n, m}, parents, [=, &t](const std::vector<double>& g) {
    MatC G(g.data(), n, m);
    if (na >= 0) {
      Mat GA(t.grad_buffer(na).data(), n, k);
      MatC B(db->data(), k, m);
      GA.noalias() += G * B.transpose();
    }
    if (nb >= 0) {
      Mat GB(t.grad_buffer(nb).data(), k, m);
      MatC A(da->data(), n, k);
      GB.noalias() += A.transpose() * G;
    }
  });
  return Array({n, m}, out, id);
}

Array transpose(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("transpose: need 2D");
  int64_t n = a.dim(0), m = a.dim(1);
  auto out = alloc(n * m);
  const double* pa = a.data().data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) (*out)[j * n + i] = pa[i * m + j];
  Shape os{m, n};
  if (!track(a)) return Array(os, out, -1);
  Tape& t = tape();
  int na = a.node();
  int id = t.push(os, {na}, [=, &t](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    for (int64_t j = 0; j < m; ++j)
      for (int64_t i = 0; i < n; ++i) ga[i * m + j] += g[j * n + i];
  });
  return Array(os, out, id);
}

static ReduceResult extreme_reduce(const Array& a, int axis, bool want_min) {
  if (a.ndim() != 2) throw std::invalid_argument("min/max_reduce: need 2D input");
  int64_t rows = a.dim(0), cols = a.dim(1);
  int64_t n_out = axis == 1 ? rows : cols;
  auto out = alloc(n_out);
  std::vector<int64_t> idx(n_out);
  const double* pa = a.data().data();
  if (axis == 1) {
    for (int64_t r = 0; r < rows; ++r) {
      int64_t best = 0;
      double bv = pa[r * cols];
      for (int64_t c = 1; c < cols; ++c) {
        double v = pa[r * cols + c];
        if (want_min ? v < bv : v > bv) { bv = v; best = c; }
      }
      (*out)[r] = bv;
      idx[r] = best;
    }
  } else {
    for (int64_t c = 0; c < cols; ++c) {
      int64_t best = 0;
      double bv = pa[c];
      for (int64_t r = 1; r < rows; ++r) {
        double v = pa[r * cols + c];
        if (want_min ? v < bv : v > bv) { bv = v; best = r; }
      }
      (*out)[c] = bv;
      idx[c] = best;
    }
  }
  Array values({n_out}, out, -1);
  if (track(a)) {
    Tape& t = tape();
    int na = a.node();
    auto saved = idx;
    int id = t.push({n_out}, {na}, [=, &t](const std::vector<double>& g) {
      std::vector<double>& ga = t.grad_buffer(na);
      for (int64_t i = 0; i < n_out; ++i) {
        int64_t off = axis == 1 ? i * cols + saved[i] : saved[i] * cols + i;
        ga[off] += g[i];
      }
    });
    values = Array({n_out}, out, id);
  }
  return {values, std::move(idx)};
}

ReduceResult min_reduce(const Array& a, int axis) { return extreme_reduce(a, axis, true); }
ReduceResult max_reduce(const Array& a, int axis) { return extreme_reduce(a, axis, false); }

Array softmax_rows(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("softmax_rows: need 2D input");
  int64_t rows = a.dim(0), cols = a.dim(1);
  auto out = alloc(rows * cols);
  const double* pa = a.data().data();
  double* po = out->data();
  for (int64_t r = 0; r < rows; ++r) {
    double m = pa[r * cols];
    for (int64_t c = 1; c < cols; ++c) m = std::max(m, pa[r * cols + c]);
    double s = 0;
    for (int64_t c = 0; c < cols; ++c) s += (po[r * cols + c] = std::exp(pa[r * cols + c] - m));
    for (int64_t c = 0; c < cols; ++c) po[r * cols + c] /= s;
  }
  if (!track(a)) return Array(a.shape(), out, -1);
  Tape& t = tape();
  int na = a.node();
  auto dout = out;
  int id = t.push(a.shape(), {na}, [=, &t](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    const double* y = dout->data();
    for (int64_t r = 0; r < rows; ++r) {
      double dot = 0;
      for (int64_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (int64_t c = 0; c < cols; ++c)
        ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
  return Array(a.shape(), out, id);
}

Array sort_columns(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("sort_columns: need 2D input");
  int64_t rows = a.dim(0), cols = a.dim(1);
  auto out = alloc(rows * cols);
  std::vector<int64_t> perm(rows * cols);
  const double* pa = a.data().data();
  std::vector<int64_t> order(rows);
  for (int64_t c = 0; c < cols; ++c) {
    std::iota(order.begin(), order.end(), int64_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](int64_t i, int64_t j) { return pa[i * cols + c] < pa[j * cols + c]; });
    for (int64_t r = 0; r < rows; ++r) {
      (*out)[r * cols + c] = pa[order[r] * cols + c];
      perm[r * cols + c] = order[r];
    }
  }
  if (!track(a)) return Array(a.shape(), out, -1);
  Tape& t = tape();
  int na = a.node();
  int id = t.push(a.shape(), {na}, [=, &t, perm = std::move(perm)](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) ga[perm[r * cols + c] * cols + c] += g[r * cols + c];
  });
  return Array(a.shape(), out, id);
}

static Array concat_axis(const std::vector<Array>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: empty");
  int nd = parts[0].ndim();
  Shape os = parts[0].shape();
  int64_t total = 0;
  for (const Array& p : parts) {
    if (p.ndim() != nd) throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis && p.shape()[d] != os[d]) throw std::invalid_argument("concat: shape mismatch");
    total += p.shape()[axis];
  }
  os[axis] = total;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= os[d];
  for (int d = axis + 1; d < nd; ++d) inner *= os[d];
  auto out = alloc(numel(os));
  int64_t col_off = 0;
  struct Piece { int node; int64_t extent, offset; };
  std::vector<Piece> pieces;
  std::vector<int> parents;
  bool any = false;
  for (const Array& p : parts) {
    int64_t ext = p.shape()[axis];
    const double* src = p.data().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(src + o * ext * inner, src + (o + 1) * ext * inner,
                out->data() + (o * total + col_off) * inner);
    if (track(p)) {
      pieces.push_back({p.node(), ext, col_off});
      parents.push_back(p.node());
      any = true;
    }
    col_off += ext;
  }
  if (!any || !tape().recording) return Array(os, out, -1);
  Tape& t = tape();
  int id = t.push(os, parents, [=, &t, pieces = std::move(pieces)](const std::vector<double>& g) {
    for (const Piece& pc : pieces) {
      std::vector<double>& gp = t.grad_buffer(pc.node);
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < pc.extent * inner; ++i)
          gp[o * pc.extent * inner + i] += g[(o * total + pc.offset) * inner + i];
    }
  });
  return Array(os, out, id);
}

Array concat_rows(const std::vector<Array>& parts) { return concat_axis(parts, 0); }
Array concat_cols(const std::vector<Array>& parts) {
  if (parts[0].ndim() != 2) throw std::invalid_argument("concat_cols: need 2D");
  return concat_axis(parts, 1);
}

Array stack_cols(const std::vector<Array>& cols) {
  std::vector<Array> as2d;
  as2d.reserve(cols.size());
  for (const Array& c : cols) as2d.push_back(c.reshape({c.size(), 1}));
  return concat_axis(as2d, 1);
}

static Array slice_axis(const Array& a, int axis, int64_t begin, int64_t end) {
  Shape os = a.shape();
  if (begin < 0 || end > os.at(axis) || begin >= end)
    throw std::invalid_argument("slice: bad range");
  int nd = a.ndim();
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= os[d];
  for (int d = axis + 1; d < nd; ++d) inner *= os[d];
  int64_t full = os[axis], ext = end - begin;
  os[axis] = ext;
  auto out = alloc(numel(os));
  const double* src = a.data().data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(src + (o * full + begin) * inner, src + (o * full + end) * inner,
              out->data() + o * ext * inner);
  if (!track(a)) return Array(os, out, -1);
  Tape& t = tape();
  int na = a.node();
  int id = t.push(os, {na}, [=, &t](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < ext * inner; ++i)
        ga[(o * full + begin) * inner + i] += g[o * ext * inner + i];
  });
  return Array(os, out, id);
}

Array slice_rows(const Array& a, int64_t begin, int64_t end) { return slice_axis(a, 0, begin, end); }
Array slice_cols(const Array& a, int64_t begin, int64_t end) {
  if (a.ndim() < 2) throw std::invalid_argument("slice_cols: need 2D");
  return slice_axis(a, 1, begin, end);
}

Array gather_rows(const Array& a, const std::vector<int64_t>& idx) {
  if (a.ndim() != 2) throw std::invalid_argument("gather_rows: need 2D");
  int64_t cols = a.dim(1), m = static_cast<int64_t>(idx.size());
  auto out = alloc(m * cols);
  const double* pa = a.data().data();
  for (int64_t i = 0; i < m; ++i) {
    int64_t r = idx[i];
    if (r < 0 || r >= a.dim(0)) throw std::out_of_range("gather_rows: index");
    std::copy(pa + r * cols, pa + (r + 1) * cols, out->data() + i * cols);
  }
  Shape os{m, cols};
  if (!track(a)) return Array(os, out, -1);
  Tape& t = tape();
  int na = a.node();
  int id = t.push(os, {na}, [=, &t, idx = idx](const std::vector<double>& g) {
    std::vector<double>& ga = t.grad_buffer(na);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t c = 0; c < cols; ++c) ga[idx[i] * cols + c] += g[i * cols + c];
  });
  return Array(os, out, id);
}

Array bilinear_gather(const Array& img, const Array& coords) {
  if (img.ndim() != 3 || coords.ndim() != 2 || coords.dim(1) != 2)
    throw std::invalid_argument("bilinear_gather: img [C,H,W], coords [N,2]");
  int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2), N = coords.dim(0);
  auto out = alloc(N * C);
  const double* pi = img.data().data();
  const double* pc = coords.data().data();

  struct Cell { int64_t x0, y0; double fx, fy; bool in_x, in_y; };
  auto locate = [W, H](double x, double y) {
    Cell c;
    c.in_x = x > 0.0 && x < static_cast<double>(W - 1);
    c.in_y = y > 0.0 && y < static_cast<double>(H - 1);
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    c.x0 = std::min(static_cast<int64_t>(x), W - 2 >= 0 ? W - 2 : 0);
    c.y0 = std::min(static_cast<int64_t>(y), H - 2 >= 0 ? H - 2 : 0);
    c.fx = x - static_cast<double>(c.x0);
    c.fy = y - static_cast<double>(c.y0);
    return c;
  };

  for (int64_t n = 0; n < N; ++n) {
    Cell c = locate(pc[n * 2], pc[n * 2 + 1]);
    int64_t x1 = std::min(c.x0 + 1, W - 1), y1 = std::min(c.y0 + 1, H - 1);
    for (int64_t ch = 0; ch < C; ++ch) {
      const double* plane = pi + ch * H * W;
      double v00 = plane[c.y0 * W + c.x0], v01 = plane[c.y0 * W + x1];
      double v10 = plane[y1 * W + c.x0], v11 = plane[y1 * W + x1];
      (*out)[n * C + ch] = (1 - c.fx) * (1 - c.fy) * v00 + c.fx * (1 - c.fy) * v01 +
                           (1 - c.fx) * c.fy * v10 + c.fx * c.fy * v11;
    }
  }
  Shape os{N, C};
  bool ti = track(img), tc = track(coords);
  if (!ti && !tc) return Array(os, out, -1);
  Tape& t = tape();
  std::vector<int> parents;
  if (ti) parents.push_back(img.node());
  if (tc) parents.push_back(coords.node());
  int ni = ti ? img.node() : -1, nc = tc ? coords.node() : -1;
  auto dimg = img.data_ptr();
  auto dcrd = coords.data_ptr();
  int id = t.push(os, parents, [=, &t](const std::vector<double>& g) {
    const double* qi = dimg->data();
    const double* qc = dcrd->data();
    std::vector<double>* gi = ni >= 0 ? &t.grad_buffer(ni) : nullptr;
    std::vector<double>* gc = nc >= 0 ? &t.grad_buffer(nc) : nullptr;
    for (int64_t n = 0; n < N; ++n) {
      Cell c = locate(qc[n * 2], qc[n * 2 + 1]);
      int64_t x1 = std::min(c.x0 + 1, W - 1), y1 = std::min(c.y0 + 1, H - 1);
      double dldx = 0, dldy = 0;
      for (int64_t ch = 0; ch < C; ++ch) {
        double go = g[n * C + ch];
        if (go == 0) continue;
        const double* plane = qi + ch * H * W;
        double v00 = plane[c.y0 * W + c.x0], v01 = plane[c.y0 * W + x1];
        double v10 = plane[y1 * W + c.x0], v11 = plane[y1 * W + x1];
        if (gi) {
          double* gp = gi->data() + ch * H * W;
          gp[c.y0 * W + c.x0] += go * (1 - c.fx) * (1 - c.fy);
          gp[c.y0 * W + x1] += go * c.fx * (1 - c.fy);
          gp[y1 * W + c.x0] += go * (1 - c.fx) * c.fy;
          gp[y1 * W + x1] += go * c.fx * c.fy;
        }
        dldx += go * ((1 - c.fy) * (v01 - v00) + c.fy * (v11 - v10));
        dldy += go * ((1 - c.fx) * (v10 - v00) + c.fx * (v11 - v01));
      }
      if (gc) {
        (*gc)[n * 2] += c.in_x ? dldx : 0.0;
        (*gc)[n * 2 + 1] += c.in_y ? dldy : 0.0;
      }
    }
  });
  return Array(os, out, id);
}

}  // namespace cygr::ops
