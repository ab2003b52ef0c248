#include "cygr/geom/transform.hpp"

#include <cmath>

namespace cygr::geom {

namespace {

std::array<double, 9> matmul3(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return c;
}

}  // namespace

// Axis matrices in row-vector form (transposes of the column convention).
std::array<double, 9> tait_bryan_to_matrix(const std::array<double, 3>& r) {
  double c1 = std::cos(r[0]), s1 = std::sin(r[0]);
  double c2 = std::cos(r[1]), s2 = std::sin(r[1]);
  double c3 = std::cos(r[2]), s3 = std::sin(r[2]);
  std::array<double, 9> Rx{1, 0, 0, 0, c1, s1, 0, -s1, c1};
  std::array<double, 9> Ry{c2, 0, -s2, 0, 1, 0, s2, 0, c2};
  std::array<double, 9> Rz{c3, s3, 0, -s3, c3, 0, 0, 0, 1};
  return matmul3(Rz, matmul3(Ry, Rx));
}

Array tait_bryan_rows(const Array& angles) {
  using namespace ops;
  if (angles.ndim() != 2 || angles.dim(1) != 3)
    throw std::invalid_argument("tait_bryan_rows: need [B,3]");
  Array r1 = slice_cols(angles, 0, 1).reshape({angles.dim(0)});
  Array r2 = slice_cols(angles, 1, 2).reshape({angles.dim(0)});
  Array r3 = slice_cols(angles, 2, 3).reshape({angles.dim(0)});
  Array c1 = cos(r1), s1 = sin(r1);
  Array c2 = cos(r2), s2 = sin(r2);
  Array c3 = cos(r3), s3 = sin(r3);
  // entries of R_z(r3) R_y(r2) R_x(r1) expanded symbolically
  Array m00 = mul(c3, c2);
  Array m01 = add(mul(mul(c3, s2), s1), mul(s3, c1));
  Array m02 = sub(mul(s3, s1), mul(mul(c3, s2), c1));
  Array m10 = neg(mul(s3, c2));
  Array m11 = sub(mul(c3, c1), mul(mul(s3, s2), s1));
  Array m12 = add(mul(mul(s3, s2), c1), mul(c3, s1));
  Array m20 = s2;
  Array m21 = neg(mul(c2, s1));
  Array m22 = mul(c2, c1);
  return stack_cols({m00, m01, m02, m10, m11, m12, m20, m21, m22});
}

std::array<double, 9> axis_angle_to_matrix(const std::array<double, 3>& axis, double angle) {
  double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  double ux = axis[0] / len, uy = axis[1] / len, uz = axis[2] / len;
  double c = std::cos(angle), s = std::sin(angle), omc = 1 - c;
  // row-vector convention: transpose of the standard Rodrigues matrix
  return {c + ux * ux * omc,      ux * uy * omc + uz * s, ux * uz * omc - uy * s,
          ux * uy * omc - uz * s, c + uy * uy * omc,      uy * uz * omc + ux * s,
          ux * uz * omc + uy * s, uy * uz * omc - ux * s, c + uz * uz * omc};
}

double geodesic_distance(const std::array<double, 9>& R1, const std::array<double, 9>& R2) {
  for (const auto* R : {&R1, &R2}) {
    // RR^T = I within tolerance
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0;
        for (int k = 0; k < 3; ++k) dot += (*R)[i * 3 + k] * (*R)[j * 3 + k];
        if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-4)
          throw std::domain_error("geodesic_distance: input is not a rotation");
      }
  }
  double tr = 0;
  for (int k = 0; k < 9; ++k) tr += R1[k] * R2[k];  // tr(R1 R2^T)
  if (tr < -1.0 - 1e-6 || tr > 3.0 + 1e-6)
    throw std::domain_error("geodesic_distance: trace outside [-1,3]");
  double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

Array geodesic_pairwise(const Array& R1, const Array& R2) {
  using namespace ops;
  if (R1.ndim() != 2 || R1.dim(1) != 9 || R2.ndim() != 2 || R2.dim(1) != 9)
    throw std::invalid_argument("geodesic_pairwise: need [n,9] rotations");
  Array traces = matmul(R1, transpose(R2));  // tr(A B^T) = sum_ij A_ij B_ij
  return arccos(scale(add_scalar(traces, -1.0), 0.5));
}

Array geodesic_rows(const Array& R1, const Array& R2) {
  using namespace ops;
  if (R1.shape() != R2.shape() || R1.ndim() != 2 || R1.dim(1) != 9)
    throw std::invalid_argument("geodesic_rows: need matching [B,9] rotations");
  Array traces = sum_axes(mul(R1, R2), {1});  // tr(A B^T) row by row
  return arccos(scale(add_scalar(traces, -1.0), 0.5));
}

Array apply_transform(const Array& positions, const Array& R, const Array& t) {
  using namespace ops;
  Array moved = matmul(positions, R);
  Array trow = t.size() == 3 && t.ndim() == 1 ? t.reshape({1, 3}) : t;
  return add(moved, trow);
}

}  // namespace cygr::geom
