#pragma once

#include "cygr/geom/mesh.hpp"

namespace cygr::geom {

Array row_sqnorms(const Array& x);                       // [n,d] -> [n,1]
Array normalize_rows(const Array& x, double eps = 1e-12);
Array pairwise_sqdist(const Array& x, const Array& y);   // [n,d],[m,d] -> [n,m], >= 0
Array dot_rows(const Array& a, const Array& b);          // [n,d] -> [n,1]
Array face_normals(const Array& positions, const std::vector<int>& faces, bool normalized);

/// Bidirectional summed mean-squared chamfer distance.
Array chamfer(const Array& x, const Array& y);
double chamfer_value(const std::vector<double>& x, const std::vector<double>& y);

/// mean over rows of X of |N(x) . N_M(nearest point of X_M)|, in [0,1].
Array normals_match(const Array& x, const Array& nx, const Array& xm, const Array& nm);

/// F-score (percent) with squared-distance threshold tau.
double fscore(const std::vector<double>& pred, const std::vector<double>& gt, double tau);

struct MeshRegularizers {
  Array edge;       // mean squared edge length
  Array laplacian;  // mean squared norm of v - mean(neighbors)
  Array flatness;   // mean over interior edges, 0 when adjacent faces are coplanar
};
MeshRegularizers mesh_regularizers(const Array& positions, const TemplateMesh& tpl);

/// Combined with the fixed edge/laplacian/flatness weights 1500/10/1.
Array mesh_regularizer_loss(const Array& positions, const TemplateMesh& tpl);

/// (1/|F|) sum over faces of per-dimension population variance of the three
/// nodal offsets.
Array offset_variance(const Array& delta, const std::vector<int>& faces);

}  // namespace cygr::geom
