#include "cygr/geom/losses.hpp"

#include <cmath>

namespace cygr::geom {

using namespace ops;

Array row_sqnorms(const Array& x) { return sum_axes(square(x), {1}); }

Array normalize_rows(const Array& x, double eps) {
  return div(x, sqrt(add_scalar(row_sqnorms(x), eps)));
}

Array dot_rows(const Array& a, const Array& b) { return sum_axes(mul(a, b), {1}); }

Array pairwise_sqdist(const Array& x, const Array& y) {
  Array cross = matmul(x, transpose(y));                      // [n,m]
  Array xs = row_sqnorms(x);                                  // [n,1]
  Array ys = transpose(row_sqnorms(y));                       // [1,m]
  Array d = add(add(neg(scale(cross, 2.0)), xs), ys);
  return relu(d);  // clip tiny negatives from cancellation
}

Array chamfer(const Array& x, const Array& y) {
  Array d = pairwise_sqdist(x, y);
  Array fwd = mean(min_reduce(d, 1).values);
  Array bwd = mean(min_reduce(d, 0).values);
  return add(fwd, bwd);
}

double chamfer_value(const std::vector<double>& x, const std::vector<double>& y) {
  int64_t n = static_cast<int64_t>(x.size()) / 3, m = static_cast<int64_t>(y.size()) / 3;
  if (n == 0 || m == 0) throw std::invalid_argument("chamfer: empty point set");
  auto one_way = [](const std::vector<double>& a, int64_t na, const std::vector<double>& b,
                    int64_t nb) {
    double acc = 0;
    for (int64_t i = 0; i < na; ++i) {
      double best = 1e300;
      for (int64_t j = 0; j < nb; ++j) {
        double dx = a[i * 3] - b[j * 3], dy = a[i * 3 + 1] - b[j * 3 + 1],
               dz = a[i * 3 + 2] - b[j * 3 + 2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      acc += best;
    }
    return acc / static_cast<double>(na);
  };
  return one_way(x, n, y, m) + one_way(y, m, x, n);
}

Array normals_match(const Array& x, const Array& nx, const Array& xm, const Array& nm) {
  if (x.dim(0) != nx.dim(0) || xm.dim(0) != nm.dim(0))
    throw std::invalid_argument("normals_match: point/normal count mismatch");
  Array d = pairwise_sqdist(x.tracked() ? x.detach() : x, xm.tracked() ? xm.detach() : xm);
  auto nearest = min_reduce(d, 1);
  Array matched = gather_rows(nm, nearest.indices);
  return mean(abs(dot_rows(nx, matched)));
}

double fscore(const std::vector<double>& pred, const std::vector<double>& gt, double tau) {
  int64_t n = static_cast<int64_t>(pred.size()) / 3, m = static_cast<int64_t>(gt.size()) / 3;
  if (n == 0 || m == 0) throw std::invalid_argument("fscore: empty point set");
  auto fraction_matched = [&](const std::vector<double>& a, int64_t na,
                              const std::vector<double>& b, int64_t nb) {
    int64_t hit = 0;
    for (int64_t i = 0; i < na; ++i) {
      double best = 1e300;
      for (int64_t j = 0; j < nb; ++j) {
        double dx = a[i * 3] - b[j * 3], dy = a[i * 3 + 1] - b[j * 3 + 1],
               dz = a[i * 3 + 2] - b[j * 3 + 2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      if (best <= tau) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(na);
  };
  double precision = fraction_matched(pred, n, gt, m);
  double recall = fraction_matched(gt, m, pred, n);
  if (precision + recall == 0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

Array face_normals(const Array& positions, const std::vector<int>& faces, bool normalized) {
  int64_t F = static_cast<int64_t>(faces.size()) / 3;
  std::vector<int64_t> ia(F), ib(F), ic(F);
  for (int64_t f = 0; f < F; ++f) {
    ia[f] = faces[f * 3];
    ib[f] = faces[f * 3 + 1];
    ic[f] = faces[f * 3 + 2];
  }
  Array va = gather_rows(positions, ia), vb = gather_rows(positions, ib),
        vc = gather_rows(positions, ic);
  Array e1 = sub(vb, va), e2 = sub(vc, va);
  auto col = [](const Array& m, int64_t c) { return slice_cols(m, c, c + 1); };
  Array nx = sub(mul(col(e1, 1), col(e2, 2)), mul(col(e1, 2), col(e2, 1)));
  Array ny = sub(mul(col(e1, 2), col(e2, 0)), mul(col(e1, 0), col(e2, 2)));
  Array nz = sub(mul(col(e1, 0), col(e2, 1)), mul(col(e1, 1), col(e2, 0)));
  Array n = concat_cols({nx, ny, nz});
  return normalized ? normalize_rows(n, 1e-18) : n;
}

MeshRegularizers mesh_regularizers(const Array& positions, const TemplateMesh& tpl) {
  int64_t E = static_cast<int64_t>(tpl.edges.size());
  std::vector<int64_t> e0(E), e1(E);
  for (int64_t e = 0; e < E; ++e) {
    e0[e] = tpl.edges[e][0];
    e1[e] = tpl.edges[e][1];
  }
  Array diffs = sub(gather_rows(positions, e0), gather_rows(positions, e1));
  Array edge = mean(row_sqnorms(diffs));

  Array lap = matmul(tpl.laplacian_const, positions);
  Array laplacian = mean(row_sqnorms(lap));

  // coplanar neighbours with consistent winding have parallel unit normals,
  // which must score zero
  Array fn = face_normals(positions, tpl.mesh.faces, true);
  int64_t P = static_cast<int64_t>(tpl.interior_pairs.size());
  std::vector<int64_t> f0(P), f1(P);
  for (int64_t p = 0; p < P; ++p) {
    f0[p] = tpl.interior_pairs[p][0];
    f1[p] = tpl.interior_pairs[p][1];
  }
  Array dots = dot_rows(gather_rows(fn, f0), gather_rows(fn, f1));
  Array flatness = mean(square(add_scalar(neg(dots), 1.0)));
  return {edge, laplacian, flatness};
}

Array mesh_regularizer_loss(const Array& positions, const TemplateMesh& tpl) {
  MeshRegularizers r = mesh_regularizers(positions, tpl);
  return add(add(scale(r.edge, 1500.0), scale(r.laplacian, 10.0)), r.flatness);
}

Array offset_variance(const Array& delta, const std::vector<int>& faces) {
  int64_t F = static_cast<int64_t>(faces.size()) / 3;
  std::vector<int64_t> ia(F), ib(F), ic(F);
  for (int64_t f = 0; f < F; ++f) {
    ia[f] = faces[f * 3];
    ib[f] = faces[f * 3 + 1];
    ic[f] = faces[f * 3 + 2];
  }
  Array a = gather_rows(delta, ia), b = gather_rows(delta, ib), c = gather_rows(delta, ic);
  Array mu = scale(add(add(a, b), c), 1.0 / 3.0);
  Array var = scale(add(add(square(sub(a, mu)), square(sub(b, mu))), square(sub(c, mu))),
                    1.0 / 3.0);
  return scale(sum(var), 1.0 / static_cast<double>(F));  // sum dims, mean faces
}

}  // namespace cygr::geom
