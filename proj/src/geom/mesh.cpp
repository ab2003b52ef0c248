#include "cygr/geom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace cygr::geom {

TriMesh make_sphere(double radius, int segments, int rings) {
  TriMesh m;
  const double pi = 3.14159265358979323846;
  // north pole, `rings` latitude rows, south pole
  m.vertices = {0, 0, radius};
  m.uv = {0.5, 1.0};
  for (int i = 1; i <= rings; ++i) {
    double phi = pi * i / (rings + 1);
    double z = radius * std::cos(phi), s = radius * std::sin(phi);
    for (int j = 0; j < segments; ++j) {
      double th = 2 * pi * j / segments;
      m.vertices.insert(m.vertices.end(), {s * std::cos(th), s * std::sin(th), z});
      m.uv.insert(m.uv.end(), {static_cast<double>(j) / segments, 1.0 - phi / pi});
    }
  }
  m.vertices.insert(m.vertices.end(), {0, 0, -radius});
  m.uv.insert(m.uv.end(), {0.5, 0.0});

  auto ring = [&](int i, int j) { return 1 + (i - 1) * segments + (j % segments); };
  int south = 1 + rings * segments;
  for (int j = 0; j < segments; ++j)
    m.faces.insert(m.faces.end(), {0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i < rings; ++i)
    for (int j = 0; j < segments; ++j) {
      int uj = ring(i, j), uj1 = ring(i, j + 1), lj = ring(i + 1, j), lj1 = ring(i + 1, j + 1);
      m.faces.insert(m.faces.end(), {uj, lj1, uj1});
      m.faces.insert(m.faces.end(), {uj, lj, lj1});
    }
  for (int j = 0; j < segments; ++j)
    m.faces.insert(m.faces.end(), {south, ring(rings, j + 1), ring(rings, j)});
  return m;
}

TemplateMesh build_template(const TriMesh& mesh) {
  TemplateMesh t;
  t.mesh = mesh;
  int64_t V = mesh.n_vertices(), F = mesh.n_faces();
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int64_t f = 0; f < F; ++f)
    for (int k = 0; k < 3; ++k) {
      int a = mesh.faces[f * 3 + k], b = mesh.faces[f * 3 + (k + 1) % 3];
      if (a < 0 || b < 0 || a >= V || b >= V) throw std::invalid_argument("mesh: face index out of range");
      edge_faces[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(f));
    }
  t.neighbors.resize(V);
  for (const auto& [e, fs] : edge_faces) {
    t.edges.push_back({e.first, e.second});
    t.neighbors[e.first].push_back(e.second);
    t.neighbors[e.second].push_back(e.first);
    if (fs.size() == 2) t.interior_pairs.push_back({fs[0], fs[1]});
  }
  t.vertices_const = Array::constant({V, 3}, mesh.vertices);
  t.uv_const = Array::constant({V, 2}, mesh.uv);
  std::vector<double> L(V * V, 0.0);
  for (int64_t v = 0; v < V; ++v) {
    L[v * V + v] = 1.0;
    double inv = t.neighbors[v].empty() ? 0.0 : 1.0 / t.neighbors[v].size();
    for (int nb : t.neighbors[v]) L[v * V + nb] -= inv;
  }
  t.laplacian_const = Array::constant({V, V}, std::move(L));
  return t;
}

namespace {

std::array<double, 3> face_normal_raw(const std::vector<double>& v, const int* f) {
  const double* a = &v[f[0] * 3];
  const double* b = &v[f[1] * 3];
  const double* c = &v[f[2] * 3];
  double e1[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  double e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
  return {e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
          e1[0] * e2[1] - e1[1] * e2[0]};
}

struct AreaTable {
  std::vector<double> cumulative;
  double total = 0;
};

AreaTable face_areas(const std::vector<double>& vertices, const std::vector<int>& faces) {
  AreaTable t;
  int64_t F = static_cast<int64_t>(faces.size()) / 3;
  t.cumulative.resize(F);
  for (int64_t f = 0; f < F; ++f) {
    auto n = face_normal_raw(vertices, &faces[f * 3]);
    double area = 0.5 * std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    t.total += area;
    t.cumulative[f] = t.total;
  }
  return t;
}

struct Draw {
  int64_t face;
  double b0, b1, b2;
};

std::vector<Draw> draw_samples(const AreaTable& areas, int64_t n, Rng& rng) {
  if (areas.total <= 0) throw std::runtime_error("sample_surface: zero total area");
  std::vector<Draw> out(n);
  for (int64_t i = 0; i < n; ++i) {
    double u = rng.uniform() * areas.total;
    auto it = std::lower_bound(areas.cumulative.begin(), areas.cumulative.end(), u);
    int64_t f = std::min<int64_t>(it - areas.cumulative.begin(),
                                  static_cast<int64_t>(areas.cumulative.size()) - 1);
    double s = std::sqrt(rng.uniform()), t = rng.uniform();
    out[i] = {f, 1.0 - s, s * (1.0 - t), s * t};
  }
  return out;
}

}  // namespace

PointCloud sample_surface(const std::vector<double>& vertices, const std::vector<int>& faces,
                          int64_t n, Rng& rng) {
  AreaTable areas = face_areas(vertices, faces);
  auto draws = draw_samples(areas, n, rng);
  PointCloud pc;
  pc.points.resize(n * 3);
  pc.normals.resize(n * 3);
  for (int64_t i = 0; i < n; ++i) {
    const Draw& d = draws[i];
    const int* f = &faces[d.face * 3];
    for (int k = 0; k < 3; ++k)
      pc.points[i * 3 + k] = d.b0 * vertices[f[0] * 3 + k] + d.b1 * vertices[f[1] * 3 + k] +
                             d.b2 * vertices[f[2] * 3 + k];
    auto nr = face_normal_raw(vertices, f);
    double len = std::sqrt(nr[0] * nr[0] + nr[1] * nr[1] + nr[2] * nr[2]);
    for (int k = 0; k < 3; ++k) pc.normals[i * 3 + k] = len > 0 ? nr[k] / len : 0.0;
  }
  return pc;
}

SampledSurface sample_surface_tape(const Array& positions, const std::vector<int>& faces,
                                   int64_t n, Rng& rng) {
  AreaTable areas = face_areas(positions.data(), faces);
  auto draws = draw_samples(areas, n, rng);
  std::vector<int64_t> i0(n), i1(n), i2(n), fid(n);
  std::vector<double> b0(n), b1(n), b2(n);
  for (int64_t i = 0; i < n; ++i) {
    const Draw& d = draws[i];
    i0[i] = faces[d.face * 3];
    i1[i] = faces[d.face * 3 + 1];
    i2[i] = faces[d.face * 3 + 2];
    fid[i] = d.face;
    b0[i] = d.b0;
    b1[i] = d.b1;
    b2[i] = d.b2;
  }
  using namespace ops;
  Array w0 = Array::constant({n, 1}, std::move(b0));
  Array w1 = Array::constant({n, 1}, std::move(b1));
  Array w2 = Array::constant({n, 1}, std::move(b2));
  Array pts = add(add(mul(gather_rows(positions, i0), w0), mul(gather_rows(positions, i1), w1)),
                  mul(gather_rows(positions, i2), w2));

  // unit face normals for every face, then gather per sample
  Array a = gather_rows(positions, std::vector<int64_t>(faces.begin(), faces.end()));
  int64_t F = static_cast<int64_t>(faces.size()) / 3;
  std::vector<int64_t> fa(F), fb(F), fc(F);
  for (int64_t f = 0; f < F; ++f) { fa[f] = f * 3; fb[f] = f * 3 + 1; fc[f] = f * 3 + 2; }
  Array va = gather_rows(a, fa), vb = gather_rows(a, fb), vc = gather_rows(a, fc);
  Array e1 = sub(vb, va), e2 = sub(vc, va);
  auto col = [](const Array& m, int64_t c) { return slice_cols(m, c, c + 1); };
  Array nx = sub(mul(col(e1, 1), col(e2, 2)), mul(col(e1, 2), col(e2, 1)));
  Array ny = sub(mul(col(e1, 2), col(e2, 0)), mul(col(e1, 0), col(e2, 2)));
  Array nz = sub(mul(col(e1, 0), col(e2, 1)), mul(col(e1, 1), col(e2, 0)));
  Array nrm = concat_cols({nx, ny, nz});
  Array len = sqrt(add_scalar(sum_axes(square(nrm), {1}), 1e-18));
  Array unit = div(nrm, len);
  return {pts, gather_rows(unit, fid)};
}

double normalize_to_unit_box(std::vector<double>& points) {
  int64_t n = static_cast<int64_t>(points.size()) / 3;
  double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
  for (int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], points[i * 3 + k]);
      hi[k] = std::max(hi[k], points[i * 3 + k]);
    }
  double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  double scale = extent > 0 ? 1.0 / extent : 1.0;
  for (int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k)
      points[i * 3 + k] = (points[i * 3 + k] - 0.5 * (lo[k] + hi[k])) * scale;
  return scale;
}

void write_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << std::setprecision(12);
  for (int64_t i = 0; i < mesh.n_vertices(); ++i)
    f << "v " << mesh.vertices[i * 3] << ' ' << mesh.vertices[i * 3 + 1] << ' '
      << mesh.vertices[i * 3 + 2] << '\n';
  for (int64_t i = 0; i < static_cast<int64_t>(mesh.uv.size()) / 2; ++i)
    f << "vt " << mesh.uv[i * 2] << ' ' << mesh.uv[i * 2 + 1] << '\n';
  bool has_uv = !mesh.uv.empty();
  for (int64_t i = 0; i < mesh.n_faces(); ++i) {
    f << 'f';
    for (int k = 0; k < 3; ++k) {
      int idx = mesh.faces[i * 3 + k] + 1;
      f << ' ' << idx;
      if (has_uv) f << '/' << idx;
    }
    f << '\n';
  }
}

TriMesh read_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  TriMesh m;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      ss >> x >> y >> z;
      m.vertices.insert(m.vertices.end(), {x, y, z});
    } else if (tag == "vt") {
      double u, v;
      ss >> u >> v;
      m.uv.insert(m.uv.end(), {u, v});
    } else if (tag == "f") {
      std::string tok;
      std::vector<int> idx;
      while (ss >> tok) idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
      if (idx.size() != 3) throw std::runtime_error("read_obj: non-triangle face in " + path);
      m.faces.insert(m.faces.end(), idx.begin(), idx.end());
    }
  }
  return m;
}

void write_point_cloud(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << std::setprecision(12);
  for (int64_t i = 0; i < pc.size(); ++i) {
    f << pc.points[i * 3] << ' ' << pc.points[i * 3 + 1] << ' ' << pc.points[i * 3 + 2] << ' '
      << pc.normals[i * 3] << ' ' << pc.normals[i * 3 + 1] << ' ' << pc.normals[i * 3 + 2]
      << '\n';
  }
}

PointCloud read_point_cloud(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  PointCloud pc;
  double x, y, z, nx, ny, nz;
  while (f >> x >> y >> z >> nx >> ny >> nz) {
    double len = std::sqrt(nx * nx + ny * ny + nz * nz);
    if (std::abs(len - 1.0) > 1e-3)
      throw std::runtime_error("point cloud normal not unit length in " + path);
    pc.points.insert(pc.points.end(), {x, y, z});
    pc.normals.insert(pc.normals.end(), {nx / len, ny / len, nz / len});
  }
  return pc;
}

}  // namespace cygr::geom
