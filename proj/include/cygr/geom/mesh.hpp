#pragma once

#include <array>
#include <string>
#include <vector>

#include "cygr/core/array.hpp"
#include "cygr/core/random.hpp"

namespace cygr::geom {

/// Plain fixed-topology triangle mesh with per-vertex UVs.
struct TriMesh {
  std::vector<double> vertices;  // V*3
  std::vector<double> uv;        // V*2, in [0,1]^2
  std::vector<int> faces;        // F*3

  int64_t n_vertices() const { return static_cast<int64_t>(vertices.size()) / 3; }
  int64_t n_faces() const { return static_cast<int64_t>(faces.size()) / 3; }
};

/// Template mesh plus derived connectivity used by the regularizers.
struct TemplateMesh {
  TriMesh mesh;
  std::vector<std::array<int, 2>> edges;            // unique undirected
  std::vector<std::array<int, 2>> interior_pairs;   // face pairs sharing each interior edge
  std::vector<std::vector<int>> neighbors;          // vertex adjacency
  Array vertices_const;   // [V,3]
  Array uv_const;         // [V,2]
  Array laplacian_const;  // [V,V], I - D^-1 A

  int64_t n_vertices() const { return mesh.n_vertices(); }
  int64_t n_faces() const { return mesh.n_faces(); }
};

/// Latitude/longitude sphere. Defaults give |V| = 2 + rings*segments = 1002
/// and |F| = 2*segments + 2*(rings-1)*segments = 2000.
TriMesh make_sphere(double radius = 0.5, int segments = 40, int rings = 25);

TemplateMesh build_template(const TriMesh& mesh);

struct PointCloud {
  std::vector<double> points;   // N*3
  std::vector<double> normals;  // N*3, unit rows
  int64_t size() const { return static_cast<int64_t>(points.size()) / 3; }
};

/// Samples `n` points uniformly by area; normals are face normals.
PointCloud sample_surface(const std::vector<double>& vertices, const std::vector<int>& faces,
                          int64_t n, Rng& rng);

struct SampledSurface {
  Array points;   // [n,3]
  Array normals;  // [n,3]
};
/// Differentiable version: the face choice and barycentric weights are fixed
/// by the stream, so gradients flow through vertex positions only.
SampledSurface sample_surface_tape(const Array& positions, const std::vector<int>& faces,
                                   int64_t n, Rng& rng);

/// Scales and centres into the unit bounding box (longest side 1, centred at
/// the origin). Returns the applied scale.
double normalize_to_unit_box(std::vector<double>& points);

// OBJ with v/vt/f records; point clouds as "x y z nx ny nz" lines.
void write_obj(const std::string& path, const TriMesh& mesh);
TriMesh read_obj(const std::string& path);
void write_point_cloud(const std::string& path, const PointCloud& pc);
PointCloud read_point_cloud(const std::string& path);

}  // namespace cygr::geom
