#include <Eigen/Dense>

#include "cygr/core/array.hpp"

namespace cygr::ops {
namespace {

using MatC = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using Mat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct ConvDims {
  int64_t B, C, H, W, K, kh, kw, OH, OW;
  int stride, pad;
};

// col layout: [C*kh*kw, OH*OW]
void im2col(const double* x, const ConvDims& d, double* col) {
  for (int64_t c = 0; c < d.C; ++c)
    for (int64_t ki = 0; ki < d.kh; ++ki)
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        double* row = col + ((c * d.kh + ki) * d.kw + kj) * d.OH * d.OW;
        for (int64_t oi = 0; oi < d.OH; ++oi) {
          int64_t ii = oi * d.stride + ki - d.pad;
          for (int64_t oj = 0; oj < d.OW; ++oj) {
            int64_t jj = oj * d.stride + kj - d.pad;
            row[oi * d.OW + oj] = (ii >= 0 && ii < d.H && jj >= 0 && jj < d.W)
                                      ? x[(c * d.H + ii) * d.W + jj]
                                      : 0.0;
          }
        }
      }
}

void col2im_acc(const double* col, const ConvDims& d, double* x) {
  for (int64_t c = 0; c < d.C; ++c)
    for (int64_t ki = 0; ki < d.kh; ++ki)
      for (int64_t kj = 0; kj < d.kw; ++kj) {
        const double* row = col + ((c * d.kh + ki) * d.kw + kj) * d.OH * d.OW;
        for (int64_t oi = 0; oi < d.OH; ++oi) {
          int64_t ii = oi * d.stride + ki - d.pad;
          if (ii < 0 || ii >= d.H) continue;
          for (int64_t oj = 0; oj < d.OW; ++oj) {
            int64_t jj = oj * d.stride + kj - d.pad;
            if (jj >= 0 && jj < d.W) x[(c * d.H + ii) * d.W + jj] += row[oi * d.OW + oj];
          }
        }
      }
}

std::shared_ptr<std::vector<double>> alloc(int64_t n) {
  return std::make_shared<std::vector<double>>(n);
}

bool track(const Array& a) { return a.tracked() && tape().recording; }

}  // namespace

Array conv2d(const Array& x, const Array& w, const Array& b, int stride, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.dim(1) != w.dim(1))
    throw std::invalid_argument("conv2d: x [B,C,H,W], w [K,C,kh,kw]");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0,
             stride, pad};
  d.OH = (d.H + 2 * pad - d.kh) / stride + 1;
  d.OW = (d.W + 2 * pad - d.kw) / stride + 1;
  if (b.size() != d.K) throw std::invalid_argument("conv2d: bias size");
  int64_t ckk = d.C * d.kh * d.kw, ohw = d.OH * d.OW;
  auto out = alloc(d.B * d.K * ohw);
  std::vector<double> col(ckk * ohw);
  for (int64_t bi = 0; bi < d.B; ++bi) {
    im2col(x.data().data() + bi * d.C * d.H * d.W, d, col.data());
    MatC Wm(w.data().data(), d.K, ckk), Cm(col.data(), ckk, ohw);
    Mat Om(out->data() + bi * d.K * ohw, d.K, ohw);
    Om.noalias() = Wm * Cm;
    for (int64_t k = 0; k < d.K; ++k) Om.row(k).array() += b.data()[k];
  }
  Shape os{d.B, d.K, d.OH, d.OW};
  bool tx = track(x), tw = track(w), tb = track(b);
  if (!tx && !tw && !tb) return Array(os, out, -1);
  Tape& t = tape();
  std::vector<int> parents;
  for (const Array* p : {&x, &w, &b})
    if (track(*p)) parents.push_back(p->node());
  int nx = tx ? x.node() : -1, nw = tw ? w.node() : -1, nb = tb ? b.node() : -1;
  auto dx = x.data_ptr();
  auto dw = w.data_ptr();
  int id = t.push(os, parents, [=, &t](const std::vector<double>& g) {
    std::vector<double> col(ckk * ohw);
    for (int64_t bi = 0; bi < d.B; ++bi) {
      MatC G(g.data() + bi * d.K * ohw, d.K, ohw);
      if (nw >= 0 || nb >= 0) {
        if (nb >= 0) {
          std::vector<double>& gb = t.grad_buffer(nb);
          for (int64_t k = 0; k < d.K; ++k) gb[k] += G.row(k).sum();
        }
        if (nw >= 0) {
          im2col(dx->data() + bi * d.C * d.H * d.W, d, col.data());
          Mat GW(t.grad_buffer(nw).data(), d.K, ckk);
          MatC Cm(col.data(), ckk, ohw);
          GW.noalias() += G * Cm.transpose();
        }
      }
      if (nx >= 0) {
        MatC Wm(dw->data(), d.K, ckk);
        Mat Cm(col.data(), ckk, ohw);
        Cm.noalias() = Wm.transpose() * G;
        col2im_acc(col.data(), d, t.grad_buffer(nx).data() + bi * d.C * d.H * d.W);
      }
    }
  });
  return Array(os, out, id);
}

Array conv2d_transpose(const Array& x, const Array& w, int stride, int pad, int output_pad) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.dim(1) != w.dim(0))
    throw std::invalid_argument("conv2d_transpose: x [B,K,OH,OW], w [K,C,kh,kw]");
  ConvDims d{x.dim(0), w.dim(1), 0, 0, w.dim(0), w.dim(2), w.dim(3), x.dim(2), x.dim(3),
             stride, pad};
  d.H = (d.OH - 1) * stride + d.kh - 2 * pad + output_pad;
  d.W = (d.OW - 1) * stride + d.kw - 2 * pad + output_pad;
  int64_t ckk = d.C * d.kh * d.kw, ohw = d.OH * d.OW;
  auto out = alloc(d.B * d.C * d.H * d.W);
  std::fill(out->begin(), out->end(), 0.0);
  std::vector<double> col(ckk * ohw);
  for (int64_t bi = 0; bi < d.B; ++bi) {
    MatC Wm(w.data().data(), d.K, ckk), Xm(x.data().data() + bi * d.K * ohw, d.K, ohw);
    Mat Cm(col.data(), ckk, ohw);
    Cm.noalias() = Wm.transpose() * Xm;
    col2im_acc(col.data(), d, out->data() + bi * d.C * d.H * d.W);
  }
  Shape os{d.B, d.C, d.H, d.W};
  bool tx = track(x), tw = track(w);
  if (!tx && !tw) return Array(os, out, -1);
  Tape& t = tape();
  std::vector<int> parents;
  if (tx) parents.push_back(x.node());
  if (tw) parents.push_back(w.node());
  int nx = tx ? x.node() : -1, nw = tw ? w.node() : -1;
  auto dx = x.data_ptr();
  auto dw = w.data_ptr();
  int id = t.push(os, parents, [=, &t](const std::vector<double>& g) {
    std::vector<double> col(ckk * ohw);
    for (int64_t bi = 0; bi < d.B; ++bi) {
      im2col(g.data() + bi * d.C * d.H * d.W, d, col.data());
      MatC Cm(col.data(), ckk, ohw);
      if (nx >= 0) {
        MatC Wm(dw->data(), d.K, ckk);
        Mat GX(t.grad_buffer(nx).data() + bi * d.K * ohw, d.K, ohw);
        GX.noalias() += Wm * Cm;
      }
      if (nw >= 0) {
        MatC Xm(dx->data() + bi * d.K * ohw, d.K, ohw);
        Mat GW(t.grad_buffer(nw).data(), d.K, ckk);
        GW.noalias() += Xm * Cm.transpose();
      }
    }
  });
  return Array(os, out, id);
}

Array avgpool2(const Array& x) {
  if (x.ndim() != 4 || x.dim(2) % 2 || x.dim(3) % 2)
    throw std::invalid_argument("avgpool2: need [B,C,2i,2j]");
  int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  int64_t OH = H / 2, OW = W / 2;
  auto out = alloc(B * C * OH * OW);
  const double* px = x.data().data();
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* in = px + bc * H * W;
    double* o = out->data() + bc * OH * OW;
    for (int64_t i = 0; i < OH; ++i)
      for (int64_t j = 0; j < OW; ++j)
        o[i * OW + j] = 0.25 * (in[2 * i * W + 2 * j] + in[2 * i * W + 2 * j + 1] +
                                in[(2 * i + 1) * W + 2 * j] + in[(2 * i + 1) * W + 2 * j + 1]);
  }
  Shape os{B, C, OH, OW};
  if (!track(x)) return Array(os, out, -1);
  Tape& t = tape();
  int nx = x.node();
  int id = t.push(os, {nx}, [=, &t](const std::vector<double>& g) {
    std::vector<double>& gx = t.grad_buffer(nx);
    for (int64_t bc = 0; bc < B * C; ++bc) {
      double* gi = gx.data() + bc * H * W;
      const double* go = g.data() + bc * OH * OW;
      for (int64_t i = 0; i < OH; ++i)
        for (int64_t j = 0; j < OW; ++j) {
          double v = 0.25 * go[i * OW + j];
          gi[2 * i * W + 2 * j] += v;
          gi[2 * i * W + 2 * j + 1] += v;
          gi[(2 * i + 1) * W + 2 * j] += v;
          gi[(2 * i + 1) * W + 2 * j + 1] += v;
        }
    }
  });
  return Array(os, out, id);
}

Array upsample2_nearest(const Array& x) {
  if (x.ndim() != 4) throw std::invalid_argument("upsample2_nearest: need [B,C,H,W]");
  int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  int64_t OH = H * 2, OW = W * 2;
  auto out = alloc(B * C * OH * OW);
  const double* px = x.data().data();
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* in = px + bc * H * W;
    double* o = out->data() + bc * OH * OW;
    for (int64_t i = 0; i < OH; ++i)
      for (int64_t j = 0; j < OW; ++j) o[i * OW + j] = in[(i / 2) * W + j / 2];
  }
  Shape os{B, C, OH, OW};
  if (!track(x)) return Array(os, out, -1);
  Tape& t = tape();
  int nx = x.node();
  int id = t.push(os, {nx}, [=, &t](const std::vector<double>& g) {
    std::vector<double>& gx = t.grad_buffer(nx);
    for (int64_t bc = 0; bc < B * C; ++bc) {
      double* gi = gx.data() + bc * H * W;
      const double* go = g.data() + bc * OH * OW;
      for (int64_t i = 0; i < OH; ++i)
        for (int64_t j = 0; j < OW; ++j) gi[(i / 2) * W + j / 2] += go[i * OW + j];
    }
  });
  return Array(os, out, id);
}

}  // namespace cygr::ops
