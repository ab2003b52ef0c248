#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "cygr/geom/mesh.hpp"
#include "cygr/render/png.hpp"
#include "cygr/render/rasterizer.hpp"
#include "cygr/render/texture.hpp"
#include "support/gradcheck.hpp"
#include "support/hard_raster.hpp"

using namespace cygr;
using namespace cygr::render;
using namespace cygr::ops;
using testsup::FdInput;
using testsup::fd_max_err;

namespace {

Array translated(const std::vector<double>& verts, double tx, double ty, double tz) {
  std::vector<double> v = verts;
  for (size_t i = 0; i < v.size(); i += 3) {
    v[i] += tx;
    v[i + 1] += ty;
    v[i + 2] += tz;
  }
  return Array::constant({static_cast<int64_t>(v.size()) / 3, 3}, v);
}

double channel_at(const Array& img, int ch, int i, int j) {
  int64_t H = img.dim(1), W = img.dim(2);
  return img.at((static_cast<int64_t>(ch) * H + i) * W + j);
}

}  // namespace

TEST_CASE("projection matches a homogeneous pinhole matrix") {
  Camera cam;
  Rng rng(11, "proj");
  int64_t V = 40;
  std::vector<double> pts(V * 3);
  for (int64_t i = 0; i < V; ++i) {
    pts[i * 3] = rng.uniform(-1.0, 1.0);
    pts[i * 3 + 1] = rng.uniform(-1.0, 1.0);
    pts[i * 3 + 2] = rng.uniform(0.5, 4.0);
  }
  Projection p = project(Array::constant({V, 3}, pts), cam);
  REQUIRE(p.xy.dim(0) == V);

  // oracle: row-vector homogeneous intrinsics [x y z] K, then divide by z
  const double K[9] = {cam.focal_px, 0, 0, 0, cam.focal_px, 0, cam.cx, cam.cy, 1};
  for (int64_t i = 0; i < V; ++i) {
    double h[3] = {0, 0, 0};
    for (int c = 0; c < 3; ++c)
      for (int r = 0; r < 3; ++r) h[c] += pts[i * 3 + r] * K[r * 3 + c];
    CHECK(p.xy.at(i * 2) == doctest::Approx(h[0] / h[2]).epsilon(1e-9));
    CHECK(p.xy.at(i * 2 + 1) == doctest::Approx(h[1] / h[2]).epsilon(1e-9));
    CHECK(p.depth.at(i) == doctest::Approx(pts[i * 3 + 2]));
    CHECK(!p.behind[i]);
  }
}

TEST_CASE("projection anchors: axis point hits the principal point, doubling depth halves the offset") {
  Camera cam;
  Projection p = project(Array::constant({3, 3}, {0, 0, 2, 0.5, 0.25, 2, 0.5, 0.25, 4}), cam);
  CHECK(p.xy.at(0) == doctest::Approx(cam.cx));
  CHECK(p.xy.at(1) == doctest::Approx(cam.cy));
  double off_x1 = p.xy.at(2) - cam.cx, off_x2 = p.xy.at(4) - cam.cx;
  double off_y1 = p.xy.at(3) - cam.cy, off_y2 = p.xy.at(5) - cam.cy;
  CHECK(off_x1 == doctest::Approx(cam.focal_px * 0.25));
  CHECK(off_x1 == doctest::Approx(2 * off_x2));
  CHECK(off_y1 == doctest::Approx(2 * off_y2));
}

TEST_CASE("behind-camera vertices stay finite and are flagged") {
  Camera cam;
  Projection p = project(Array::constant({2, 3}, {0.3, 0.2, -1.0, 0.3, 0.2, 0.01}), cam);
  for (int64_t i = 0; i < 4; ++i) CHECK(std::isfinite(p.xy.at(i)));
  CHECK(p.behind[0]);
  CHECK(p.behind[1]);
  // the clamped division treats both as sitting at the near clip
  CHECK(p.xy.at(0) == doctest::Approx(cam.cx + cam.focal_px * 0.3 / kNearClip));
}

TEST_CASE("projection gradients match finite differences") {
  std::vector<double> pts = {0.2, -0.3, 1.7, -0.4, 0.1, 2.6, 0.05, 0.3, 3.1};
  auto f = [](const std::vector<Array>& in) {
    Camera cam;
    Projection p = project(in[0], cam);
    return add(sum(square(scale(p.xy, 0.01))), sum(square(p.depth)));
  };
  CHECK(fd_max_err({{{3, 3}, pts}}, f) < 1e-6);
}

TEST_CASE("sharp rasterization agrees with a hard point-in-triangle oracle") {
  Camera cam;
  geom::TriMesh sphere = geom::make_sphere();
  Array pos = translated(sphere.vertices, 0.05, -0.08, 2.5);
  Projection p = project(pos, cam);

  RasterSettings st;
  st.sigma = 1e-5;
  st.gamma = 1e-4;
  Array img = soft_rasterize(p.xy, p.depth, Array::constant({pos.dim(0), 3},
                             std::vector<double>(pos.dim(0) * 3, 0.8)),
                             sphere.faces, cam.width, cam.height, st);

  std::vector<double> xy(p.xy.size()), z(p.depth.size());
  for (int64_t i = 0; i < p.xy.size(); ++i) xy[i] = p.xy.at(i);
  for (int64_t i = 0; i < p.depth.size(); ++i) z[i] = p.depth.at(i);
  std::vector<char> hard = testsup::hard_coverage(xy, z, sphere.faces, cam.width, cam.height);

  int64_t HW = static_cast<int64_t>(cam.width) * cam.height;
  int64_t mismatch = 0, covered = 0;
  for (int64_t q = 0; q < HW; ++q) {
    bool soft_on = img.at(3 * HW + q) > 0.5;
    covered += hard[q];
    if (soft_on != static_cast<bool>(hard[q])) ++mismatch;
  }
  CHECK(covered > 800);  // the sphere fills a real portion of the frame
  CHECK(static_cast<double>(mismatch) / HW <= 0.01);
}

TEST_CASE("interior of a sharp opaque triangle saturates alpha and keeps its colour") {
  RasterSettings st;
  st.sigma = 1e-5;
  st.gamma = 1e-4;
  Array xy = Array::constant({3, 2}, {8, 8, 56, 8, 32, 56});
  Array z = Array::constant({3}, {2.0, 2.0, 2.0});
  Array c = Array::constant({3, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0});
  Array img = soft_rasterize(xy, z, c, {0, 1, 2}, 64, 64, st);
  int64_t HW = 64 * 64;
  for (int i = 20; i <= 30; ++i)
    for (int j = 28; j <= 36; ++j) {
      CHECK(img.at(3 * HW + i * 64 + j) >= 0.999);
      CHECK(channel_at(img, 0, i, j) == doctest::Approx(1.0).epsilon(1e-3));
      CHECK(std::abs(channel_at(img, 1, i, j)) < 1e-3);
    }
  for (int64_t q = 0; q < 4 * HW; ++q) {
    CHECK(std::isfinite(img.at(q)));
    if (q >= 3 * HW) {
      CHECK(img.at(q) >= 0.0);
      CHECK(img.at(q) <= 1.0);
    }
  }
}

TEST_CASE("an off-frame mesh leaves the background colour and zero alpha") {
  RasterSettings st;
  st.background = {0.2, 0.4, 0.6};
  Array xy = Array::constant({3, 2}, {1008, 8, 1056, 8, 1032, 56});
  Array z = Array::constant({3}, {2.0, 2.0, 2.0});
  Array c = Array::constant({3, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0});
  Array img = soft_rasterize(xy, z, c, {0, 1, 2}, 32, 32, st);
  int64_t HW = 32 * 32;
  for (int64_t q = 0; q < HW; ++q) {
    CHECK(channel_at(img, 0, q / 32, q % 32) == doctest::Approx(0.2));
    CHECK(channel_at(img, 1, q / 32, q % 32) == doctest::Approx(0.4));
    CHECK(channel_at(img, 2, q / 32, q % 32) == doctest::Approx(0.6));
    CHECK(img.at(3 * HW + q) == 0.0);
  }
}

TEST_CASE("behind-camera and degenerate faces contribute nothing") {
  RasterSettings st;
  Array z = Array::constant({6}, {2.0, 2.0, 0.01, 2.0, 2.0, 2.0});
  // face 0 has a behind-clip vertex; face 1 projects to a zero-area sliver
  Array xy2 = Array::constant({6, 2}, {8, 8, 56, 8, 32, 56, 10, 10, 20, 20, 30, 30});
  Array c = Array::constant({6, 3}, std::vector<double>(18, 1.0));
  Array img = soft_rasterize(xy2, z, c, {0, 1, 2, 3, 4, 5}, 64, 64, st);
  int64_t HW = 64 * 64;
  for (int64_t q = 0; q < HW; ++q) CHECK(img.at(3 * HW + q) == 0.0);
}

TEST_CASE("raster gradients match finite differences at sampled pixels") {
  const int W = 16, H = 16;
  std::vector<int> faces = {0, 1, 2, 3, 4, 5};
  std::vector<double> xy = {3.1, 3.4, 12.2, 4.1, 7.6, 12.8, 5.2, 2.2, 13.6, 9.3, 2.4, 10.7};
  std::vector<double> z = {1.8, 2.2, 2.0, 2.9, 3.1, 2.7};
  std::vector<double> c = {0.9, 0.2, 0.1, 0.8, 0.3, 0.2, 0.7, 0.1, 0.3,
                           0.1, 0.6, 0.9, 0.2, 0.7, 0.8, 0.3, 0.5, 0.7};

  // random pixel probes, fixed across the check
  Rng rng(23, "raster-fd");
  std::vector<double> mask(4 * W * H, 0.0);
  for (int k = 0; k < 20; ++k) {
    int ch = static_cast<int>(rng.uniform_int(4));
    int i = static_cast<int>(rng.uniform_int(H));
    int j = static_cast<int>(rng.uniform_int(W));
    mask[(static_cast<int64_t>(ch) * H + i) * W + j] += rng.uniform(0.5, 1.5);
  }
  Array mconst = Array::constant({4, H, W}, mask);

  RasterSettings st;
  st.sigma = 5e-3;
  st.gamma = 5e-2;
  st.background = {0.1, 0.1, 0.1};
  auto f = [&](const std::vector<Array>& in) {
    return sum(mul(soft_rasterize(in[0], in[1], in[2], faces, W, H, st), mconst));
  };
  double err = fd_max_err({{{6, 2}, xy}, {{6}, z}, {{6, 3}, c}}, f, 1e-5, 64, 5);
  CHECK(err < 1e-3);
}

TEST_CASE("full render path gradients match finite differences") {
  std::vector<double> pos = {-0.25, -0.2, 2.1, 0.3, -0.15, 2.4, 0.05, 0.35, 2.2};
  std::vector<double> c = {0.9, 0.4, 0.1, 0.2, 0.8, 0.5, 0.3, 0.2, 0.9};
  Camera cam;
  cam.width = 16;
  cam.height = 16;
  cam.cx = 8;
  cam.cy = 8;
  cam.focal_px = 28;
  RasterSettings st;
  st.sigma = 5e-3;
  st.gamma = 5e-2;
  auto f = [&](const std::vector<Array>& in) {
    return mean(render_mesh(in[0], in[1], {0, 1, 2}, cam, st));
  };
  CHECK(fd_max_err({{{3, 3}, pos}, {{3, 3}, c}}, f) < 1e-3);
}

TEST_CASE("rasterization is equivariant to integer pixel shifts") {
  RasterSettings st;
  st.sigma = 1e-3;
  st.gamma = 1e-3;
  std::vector<double> base = {10.3, 9.7, 40.6, 12.2, 24.9, 43.1};
  Array xy = Array::constant({3, 2}, base);
  Array z = Array::constant({3}, {2.0, 2.4, 2.2});
  Array c = Array::constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Array img = soft_rasterize(xy, z, c, {0, 1, 2}, 64, 64, st);
  std::vector<double> shifted = base;
  for (size_t k = 0; k < shifted.size(); k += 2) {
    shifted[k] += 3.0;
    shifted[k + 1] += 2.0;
  }
  Array xy2 = Array::constant({3, 2}, shifted);
  Array img2 = soft_rasterize(xy2, z, c, {0, 1, 2}, 64, 64, st);
  for (int ch = 0; ch < 4; ++ch)
    for (int i = 0; i < 60; ++i)
      for (int j = 0; j < 58; ++j)
        CHECK(channel_at(img2, ch, i + 2, j + 3) ==
              doctest::Approx(channel_at(img, ch, i, j)).epsilon(1e-12));
}

TEST_CASE("depth aggregation keeps the nearer face on top") {
  RasterSettings st;
  st.sigma = 1e-5;
  st.gamma = 1e-4;
  Array xy = Array::constant({6, 2}, {8, 8, 56, 8, 32, 56, 8, 10, 56, 10, 32, 58});
  Array c = Array::constant({6, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1});
  std::vector<int> faces = {0, 1, 2, 3, 4, 5};

  Array near_red = soft_rasterize(xy, Array::constant({6}, {1.5, 1.5, 1.5, 3, 3, 3}), c, faces,
                                  64, 64, st);
  Array near_blue = soft_rasterize(xy, Array::constant({6}, {3, 3, 3, 1.5, 1.5, 1.5}), c, faces,
                                   64, 64, st);
  CHECK(channel_at(near_red, 0, 24, 32) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(channel_at(near_red, 2, 24, 32) == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(channel_at(near_blue, 2, 24, 32) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(channel_at(near_blue, 0, 24, 32) == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("uv sampling anchors: corners, midpoints and constant textures") {
  Array tex = Array::constant({1, 2, 2}, {1.0, 3.0, 5.0, 7.0});
  Array uv = Array::constant({4, 2}, {0, 0, 1, 0, 0, 1, 0.5, 0.5});
  Array s = uv_sample(tex, uv);
  CHECK(s.at(0) == doctest::Approx(1.0));  // (0,0) addresses the first texel
  CHECK(s.at(1) == doctest::Approx(3.0));  // u moves along texture width
  CHECK(s.at(2) == doctest::Approx(5.0));
  CHECK(s.at(3) == doctest::Approx(4.0));  // centre averages all four texels

  Rng rng(3, "uvtest");
  std::vector<double> any(30);
  for (double& x : any) x = rng.uniform(0.0, 1.0);
  Array flat = uv_sample(Array::constant({3, 5, 7}, std::vector<double>(105, 0.37)),
                         Array::constant({15, 2}, any));
  for (int64_t i = 0; i < flat.size(); ++i) CHECK(flat.at(i) == doctest::Approx(0.37));
}

TEST_CASE("tanh outputs map onto the unit colour range") {
  Array y = to_unit_range(Array::constant({3}, {-1.0, 0.0, 1.0}));
  CHECK(y.at(0) == doctest::Approx(0.0));
  CHECK(y.at(1) == doctest::Approx(0.5));
  CHECK(y.at(2) == doctest::Approx(1.0));
}

TEST_CASE("unprojecting a uniform image paints every vertex the same") {
  Camera cam;
  geom::TriMesh sphere = geom::make_sphere();
  Array img = Array::constant({3, cam.height, cam.width},
                              std::vector<double>(3 * cam.height * cam.width, 0.37));
  Array u = unproject(img, translated(sphere.vertices, 0.3, -0.2, 2.2), cam);
  REQUIRE(u.dim(0) == sphere.n_vertices());
  REQUIRE(u.dim(1) == 3);
  for (int64_t i = 0; i < u.size(); ++i) CHECK(u.at(i) == doctest::Approx(0.37));
}

TEST_CASE("render then unproject recovers front-facing vertex colours") {
  Camera cam;
  geom::TriMesh sphere = geom::make_sphere();
  int64_t V = sphere.n_vertices();
  const double cx = 0.0, cy = 0.0, cz = 2.5;

  // smooth nodal texture so interpolation error stays small
  std::vector<double> colors(V * 3);
  for (int64_t i = 0; i < V; ++i) {
    double nx = sphere.vertices[i * 3] / 0.5;
    double ny = sphere.vertices[i * 3 + 1] / 0.5;
    colors[i * 3] = 0.5 + 0.45 * nx;
    colors[i * 3 + 1] = 0.5 + 0.45 * ny;
    colors[i * 3 + 2] = 0.5;
  }
  Array pos = translated(sphere.vertices, cx, cy, cz);
  RasterSettings st;
  st.sigma = 1e-5;
  st.gamma = 1e-4;
  Array raster = render_mesh(pos, Array::constant({V, 3}, colors), sphere.faces, cam, st);

  int64_t HW = static_cast<int64_t>(cam.width) * cam.height;
  std::vector<double> rgb(raster.data().begin(), raster.data().begin() + 3 * HW);
  Array img = Array::constant({3, cam.height, cam.width}, rgb);
  Array u = unproject(img, pos, cam);

  int64_t front = 0, good = 0;
  for (int64_t i = 0; i < V; ++i) {
    // unit sphere about the centre: the radial direction is the normal
    double nrm[3] = {sphere.vertices[i * 3] / 0.5, sphere.vertices[i * 3 + 1] / 0.5,
                     sphere.vertices[i * 3 + 2] / 0.5};
    double view[3] = {cx + sphere.vertices[i * 3], cy + sphere.vertices[i * 3 + 1],
                      cz + sphere.vertices[i * 3 + 2]};
    double dot = nrm[0] * view[0] + nrm[1] * view[1] + nrm[2] * view[2];
    if (dot >= 0) continue;  // back side
    ++front;
    bool ok = true;
    for (int ch = 0; ch < 3; ++ch)
      if (std::abs(u.at(i * 3 + ch) - colors[i * 3 + ch]) > 0.1) ok = false;
    good += ok;
  }
  CHECK(front > 400);
  CHECK(static_cast<double>(good) / front >= 0.9);
}

TEST_CASE("png files survive a quantized write/read roundtrip") {
  ImageRGBA img;
  img.height = 9;
  img.width = 7;
  img.planes.resize(4 * 9 * 7);
  Rng rng(5, "png");
  for (double& v : img.planes) v = std::round(rng.uniform(0.0, 1.0) * 255.0) / 255.0;
  const char* path = "roundtrip_test.png";
  write_png(path, img);
  ImageRGBA back = read_png(path);
  std::remove(path);
  REQUIRE(back.height == 9);
  REQUIRE(back.width == 7);
  for (size_t i = 0; i < img.planes.size(); ++i)
    CHECK(back.planes[i] == doctest::Approx(img.planes[i]).epsilon(1e-12));

  ImageRGBA clipped;
  clipped.height = clipped.width = 1;
  clipped.planes = {1.7, -0.3, 0.5, 2.0};
  write_png(path, clipped);
  ImageRGBA cb = read_png(path);
  std::remove(path);
  CHECK(cb.planes[0] == doctest::Approx(1.0));
  CHECK(cb.planes[1] == doctest::Approx(0.0));
  CHECK(cb.planes[3] == doctest::Approx(1.0));
}
