#include "cygr/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace cygr::render {

namespace {

double stable_sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

// All screen-space math runs in normalized [-1,1] coordinates; the
// pixel-unit chain factor is applied when scattering gradients.
struct TriPoint {
  double v[3][2];  // a,b,c
  double px, py;

  double N[3], T;     // cross areas per corner, denominator
  double lam[3], kap[3], lamhat[3], ksum;
  bool inside;
  int seg;            // nearest boundary segment (0:ab, 1:bc, 2:ca)
  double useg, d2;

  static double cross(double ux, double uy, double vx, double vy) { return ux * vy - uy * vx; }

  void compute() {
    N[0] = cross(v[1][0] - px, v[1][1] - py, v[2][0] - px, v[2][1] - py);
    N[1] = cross(v[2][0] - px, v[2][1] - py, v[0][0] - px, v[0][1] - py);
    N[2] = cross(v[0][0] - px, v[0][1] - py, v[1][0] - px, v[1][1] - py);
    T = N[0] + N[1] + N[2];
    inside = true;
    ksum = 0;
    for (int i = 0; i < 3; ++i) {
      lam[i] = N[i] / T;
      if (lam[i] < 0) inside = false;
      kap[i] = std::clamp(lam[i], 0.0, 1.0);
      ksum += kap[i];
    }
    for (int i = 0; i < 3; ++i) lamhat[i] = kap[i] / ksum;
    d2 = 1e300;
    seg = 0;
    useg = 0;
    for (int s = 0; s < 3; ++s) {
      const double* p0 = v[s];
      const double* p1 = v[(s + 1) % 3];
      double wx = p1[0] - p0[0], wy = p1[1] - p0[1];
      double ww = wx * wx + wy * wy;
      double u = ww > 0 ? std::clamp(((px - p0[0]) * wx + (py - p0[1]) * wy) / ww, 0.0, 1.0) : 0.0;
      double qx = p0[0] + u * wx, qy = p0[1] + u * wy;
      double dd = (px - qx) * (px - qx) + (py - qy) * (py - qy);
      if (dd < d2) {
        d2 = dd;
        seg = s;
        useg = u;
      }
    }
  }

  // d(d2)/d(vertex coords); the segment parameter is held fixed (exact by
  // the envelope theorem, including at clamped endpoints)
  void dist_grad(double out[3][2]) const {
    for (int i = 0; i < 3; ++i) out[i][0] = out[i][1] = 0;
    const double* p0 = v[seg];
    const double* p1 = v[(seg + 1) % 3];
    double qx = p0[0] + useg * (p1[0] - p0[0]);
    double qy = p0[1] + useg * (p1[1] - p0[1]);
    double rx = px - qx, ry = py - qy;
    out[seg][0] = -2 * rx * (1 - useg);
    out[seg][1] = -2 * ry * (1 - useg);
    out[(seg + 1) % 3][0] = -2 * rx * useg;
    out[(seg + 1) % 3][1] = -2 * ry * useg;
  }

  // dN[i]/d(vertex j coords)
  void cross_grads(double dN[3][3][2]) const {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) dN[i][j][0] = dN[i][j][1] = 0;
    // N[0] = (b-p) x (c-p)
    dN[0][1][0] = v[2][1] - py;
    dN[0][1][1] = -(v[2][0] - px);
    dN[0][2][0] = -(v[1][1] - py);
    dN[0][2][1] = v[1][0] - px;
    // N[1] = (c-p) x (a-p)
    dN[1][2][0] = v[0][1] - py;
    dN[1][2][1] = -(v[0][0] - px);
    dN[1][0][0] = -(v[2][1] - py);
    dN[1][0][1] = v[2][0] - px;
    // N[2] = (a-p) x (b-p)
    dN[2][0][0] = v[1][1] - py;
    dN[2][0][1] = -(v[1][0] - px);
    dN[2][1][0] = -(v[0][1] - py);
    dN[2][1][1] = v[0][0] - px;
  }
};

struct PairRec {
  int face;
  double D, e, c[3];
};

struct PixAgg {
  double S = 0, m = 0, rgb[3] = {0, 0, 0}, prod_nz = 1;
  int zeros = 0;
};

}  // namespace

Array soft_rasterize(const Array& xy, const Array& depth, const Array& colors,
                     const std::vector<int>& faces, int width, int height,
                     const RasterSettings& st) {
  if (xy.ndim() != 2 || xy.dim(1) != 2 || depth.ndim() != 1 || colors.ndim() != 2 ||
      colors.dim(1) != 3 || xy.dim(0) != depth.dim(0) || xy.dim(0) != colors.dim(0))
    throw std::invalid_argument("soft_rasterize: xy [V,2], depth [V], colors [V,3]");
  if (faces.empty()) throw std::invalid_argument("soft_rasterize: empty mesh");
  const int64_t HW = static_cast<int64_t>(width) * height;
  const int64_t F = static_cast<int64_t>(faces.size()) / 3;
  const double* pxy = xy.data().data();
  const double* pz = depth.data().data();
  const double* pc = colors.data().data();

  auto to_nx = [&](double x_px) { return (2.0 * x_px - width) / width; };
  auto to_ny = [&](double y_px) { return (2.0 * y_px - height) / height; };

  auto pixel_geom = [&](int64_t f, int px_i, int px_j, TriPoint& tp) {
    const int* fv = &faces[f * 3];
    for (int k = 0; k < 3; ++k) {
      tp.v[k][0] = to_nx(pxy[fv[k] * 2]);
      tp.v[k][1] = to_ny(pxy[fv[k] * 2 + 1]);
    }
    tp.px = to_nx(px_j + 0.5);
    tp.py = to_ny(px_i + 0.5);
    tp.compute();
  };

  std::vector<std::vector<PairRec>> pix(HW);
  const double support_px = std::sqrt(st.cutoff * st.sigma) * width / 2.0 + 1.0;
  for (int64_t f = 0; f < F; ++f) {
    const int* fv = &faces[f * 3];
    bool skip = false;
    double lox = 1e300, hix = -1e300, loy = 1e300, hiy = -1e300;
    for (int k = 0; k < 3; ++k) {
      if (pz[fv[k]] <= kNearClip) skip = true;
      lox = std::min(lox, pxy[fv[k] * 2]);
      hix = std::max(hix, pxy[fv[k] * 2]);
      loy = std::min(loy, pxy[fv[k] * 2 + 1]);
      hiy = std::max(hiy, pxy[fv[k] * 2 + 1]);
    }
    if (skip) continue;
    double area2 = TriPoint::cross(to_nx(pxy[fv[1] * 2]) - to_nx(pxy[fv[0] * 2]),
                                   to_ny(pxy[fv[1] * 2 + 1]) - to_ny(pxy[fv[0] * 2 + 1]),
                                   to_nx(pxy[fv[2] * 2]) - to_nx(pxy[fv[0] * 2]),
                                   to_ny(pxy[fv[2] * 2 + 1]) - to_ny(pxy[fv[0] * 2 + 1]));
    if (std::abs(area2) < 1e-12) continue;  // degenerate projection: no influence
    int j0 = std::max(0, static_cast<int>(std::floor(lox - support_px)));
    int j1 = std::min(width - 1, static_cast<int>(std::ceil(hix + support_px)));
    int i0 = std::max(0, static_cast<int>(std::floor(loy - support_px)));
    int i1 = std::min(height - 1, static_cast<int>(std::ceil(hiy + support_px)));
    if (j0 > j1 || i0 > i1) continue;

    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        TriPoint tp;
        pixel_geom(f, i, j, tp);
        double t = (tp.inside ? 1.0 : -1.0) * tp.d2 / st.sigma;
        if (!tp.inside && tp.d2 / st.sigma > st.cutoff) continue;
        double D = stable_sigmoid(t);
        double zhat = 0;
        for (int k = 0; k < 3; ++k) zhat += tp.lamhat[k] * pz[fv[k]];
        double w = std::clamp((st.z_far - zhat) / (st.z_far - st.z_near), 0.0, 1.0);
        PairRec rec;
        rec.face = static_cast<int>(f);
        rec.D = D;
        rec.e = w / st.gamma;
        for (int ch = 0; ch < 3; ++ch) {
          rec.c[ch] = 0;
          for (int k = 0; k < 3; ++k) rec.c[ch] += tp.lamhat[k] * pc[fv[k] * 3 + ch];
        }
        pix[static_cast<int64_t>(i) * width + j].push_back(rec);
      }
  }

  auto out = std::make_shared<std::vector<double>>(4 * HW, 0.0);
  std::vector<PixAgg> agg(HW);
  for (int64_t p = 0; p < HW; ++p) {
    PixAgg& a = agg[p];
    a.m = 0.0;  // background exponent is 0
    for (const PairRec& r : pix[p]) a.m = std::max(a.m, r.e);
    double S = std::exp(0.0 - a.m);
    double rgb[3] = {st.background[0] * S, st.background[1] * S, st.background[2] * S};
    for (const PairRec& r : pix[p]) {
      double P = r.D * std::exp(r.e - a.m);
      S += P;
      for (int ch = 0; ch < 3; ++ch) rgb[ch] += P * r.c[ch];
      double om = 1.0 - r.D;
      if (om == 0.0)
        ++a.zeros;
      else
        a.prod_nz *= om;
    }
    a.S = S;
    for (int ch = 0; ch < 3; ++ch) {
      a.rgb[ch] = rgb[ch] / S;
      (*out)[ch * HW + p] = a.rgb[ch];
    }
    (*out)[3 * HW + p] = pix[p].empty() ? 0.0 : 1.0 - (a.zeros > 0 ? 0.0 : a.prod_nz);
  }

  Shape os{4, static_cast<int64_t>(height), static_cast<int64_t>(width)};
  bool txy = xy.tracked(), tz = depth.tracked(), tc = colors.tracked();
  if ((!txy && !tz && !tc) || !tape().recording) return Array(os, out, -1);

  Tape& t = tape();
  std::vector<int> parents;
  for (const Array* a : {&xy, &depth, &colors})
    if (a->tracked()) parents.push_back(a->node());
  int nxy = txy ? xy.node() : -1, nz = tz ? depth.node() : -1, nc = tc ? colors.node() : -1;
  auto dxy = xy.data_ptr();
  auto dz = depth.data_ptr();
  auto dc = colors.data_ptr();

  int id = t.push(os, parents,
                  [=, &t, pix = std::move(pix), agg = std::move(agg),
                   faces = faces](const std::vector<double>& g) {
    const double* pxy = dxy->data();
    const double* pz = dz->data();
    const double* pc = dc->data();
    std::vector<double>* gxy = nxy >= 0 ? &t.grad_buffer(nxy) : nullptr;
    std::vector<double>* gz = nz >= 0 ? &t.grad_buffer(nz) : nullptr;
    std::vector<double>* gc = nc >= 0 ? &t.grad_buffer(nc) : nullptr;
    const double chain_x = 2.0 / width, chain_y = 2.0 / height;

    for (int64_t p = 0; p < HW; ++p) {
      if (pix[p].empty()) continue;
      const PixAgg& a = agg[p];
      double grgb[3] = {g[p], g[HW + p], g[2 * HW + p]};
      double galpha = g[3 * HW + p];
      int i = static_cast<int>(p / width), j = static_cast<int>(p % width);

      for (const PairRec& r : pix[p]) {
        const int* fv = &faces[r.face * 3];
        double expo = std::exp(r.e - a.m);
        double P = r.D * expo;
        double gP = 0;
        for (int ch = 0; ch < 3; ++ch) gP += grgb[ch] * (r.c[ch] - a.rgb[ch]) / a.S;
        double om = 1.0 - r.D;
        double dalpha_dD;
        if (a.zeros == 0)
          dalpha_dD = a.prod_nz / om;
        else if (a.zeros == 1 && om == 0.0)
          dalpha_dD = a.prod_nz;
        else
          dalpha_dD = 0.0;
        double gD = gP * expo + galpha * dalpha_dD;
        double ge = gP * P;
        double gcol[3];
        for (int ch = 0; ch < 3; ++ch) gcol[ch] = grgb[ch] * P / a.S;

        TriPoint tp;
        {
          const int* f3 = fv;
          for (int k = 0; k < 3; ++k) {
            tp.v[k][0] = (2.0 * pxy[f3[k] * 2] - width) / width;
            tp.v[k][1] = (2.0 * pxy[f3[k] * 2 + 1] - height) / height;
          }
          tp.px = (2.0 * (j + 0.5) - width) / width;
          tp.py = (2.0 * (i + 0.5) - height) / height;
          tp.compute();
        }

        // D = sigmoid(sign * d2 / sigma)
        double sgn = tp.inside ? 1.0 : -1.0;
        double gd2 = gD * r.D * (1.0 - r.D) * sgn / st.sigma;
        double dd2[3][2];
        tp.dist_grad(dd2);

        // e = clamp depth weight / gamma
        double zhat = 0;
        for (int k = 0; k < 3; ++k) zhat += tp.lamhat[k] * pz[fv[k]];
        double wlin = (st.z_far - zhat) / (st.z_far - st.z_near);
        double gzhat = (wlin > 0.0 && wlin < 1.0) ? ge * (-1.0 / (st.gamma * (st.z_far - st.z_near)))
                                                  : 0.0;

        // contributions through the clamped barycentric weights
        double glamhat[3];
        for (int k = 0; k < 3; ++k) {
          glamhat[k] = gzhat * pz[fv[k]];
          for (int ch = 0; ch < 3; ++ch) glamhat[k] += gcol[ch] * pc[fv[k] * 3 + ch];
        }
        if (gz)
          for (int k = 0; k < 3; ++k) (*gz)[fv[k]] += gzhat * tp.lamhat[k];
        if (gc)
          for (int k = 0; k < 3; ++k)
            for (int ch = 0; ch < 3; ++ch) (*gc)[fv[k] * 3 + ch] += gcol[ch] * tp.lamhat[k];

        if (!gxy) continue;
        // lamhat -> kappa -> lambda -> vertex positions
        double gkap[3];
        for (int k = 0; k < 3; ++k) {
          gkap[k] = 0;
          for (int l = 0; l < 3; ++l)
            gkap[k] += glamhat[l] * ((l == k ? tp.ksum : 0.0) - tp.kap[l]) / (tp.ksum * tp.ksum);
        }
        double glam[3];
        for (int k = 0; k < 3; ++k)
          glam[k] = (tp.lam[k] > 0.0 && tp.lam[k] < 1.0) ? gkap[k] : 0.0;

        double dN[3][3][2];
        tp.cross_grads(dN);
        double gvert[3][2] = {{0, 0}, {0, 0}, {0, 0}};
        for (int k = 0; k < 3; ++k) {  // lambda_k = N_k / T
          if (glam[k] == 0.0) continue;
          for (int vtx = 0; vtx < 3; ++vtx)
            for (int d = 0; d < 2; ++d) {
              double dT = dN[0][vtx][d] + dN[1][vtx][d] + dN[2][vtx][d];
              gvert[vtx][d] += glam[k] * (dN[k][vtx][d] * tp.T - tp.N[k] * dT) / (tp.T * tp.T);
            }
        }
        for (int vtx = 0; vtx < 3; ++vtx)
          for (int d = 0; d < 2; ++d) gvert[vtx][d] += gd2 * dd2[vtx][d];

        for (int vtx = 0; vtx < 3; ++vtx) {
          (*gxy)[fv[vtx] * 2] += gvert[vtx][0] * chain_x;
          (*gxy)[fv[vtx] * 2 + 1] += gvert[vtx][1] * chain_y;
        }
      }
    }
  });
  return Array(os, out, id);
}

Array render_mesh(const Array& scene_positions, const Array& nodal_colors,
                  const std::vector<int>& faces, const Camera& cam,
                  const RasterSettings& settings) {
  Projection pr = project(scene_positions, cam);
  return soft_rasterize(pr.xy, pr.depth, nodal_colors, faces, cam.width, cam.height, settings);
}

}  // namespace cygr::render
