#pragma once

#include <array>

#include "cygr/core/array.hpp"

namespace cygr::geom {

/// Rigid body pose acting on row vectors: x -> xR + t.
struct EuclideanTransform {
  std::array<double, 9> R{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  std::array<double, 3> t{0, 0, 0};
  std::array<double, 3> r{0, 0, 0};  // Tait-Bryan angles generating R
};

/// R = R_z(r3) R_y(r2) R_x(r1), with each axis matrix in row-vector form,
/// e.g. (0,1,0) R_x(pi/2) = (0,0,1).
std::array<double, 9> tait_bryan_to_matrix(const std::array<double, 3>& r);

/// Batched tape version: angles [B,3] -> rotations [B,9] row-major.
Array tait_bryan_rows(const Array& angles);

/// arccos((tr(R1 R2^T) - 1) / 2), in [0, pi]. Throws if either input is not
/// a rotation within tolerance.
double geodesic_distance(const std::array<double, 9>& R1, const std::array<double, 9>& R2);

/// Tape version over batches: [n,9] x [m,9] -> [n,m] pairwise distances.
/// Inputs are trusted (training-side rotations are orthonormal by
/// construction); the arccos argument is clamped.
Array geodesic_pairwise(const Array& R1, const Array& R2);

/// Row-paired distances: [B,9] x [B,9] -> [B,1].
Array geodesic_rows(const Array& R1, const Array& R2);

/// positions [V,3], R [3,3], t [1,3] or [3]
Array apply_transform(const Array& positions, const Array& R, const Array& t);

std::array<double, 9> axis_angle_to_matrix(const std::array<double, 3>& axis, double angle);

inline std::array<double, 3> apply_to_point(const std::array<double, 9>& R,
                                            const std::array<double, 3>& t,
                                            const std::array<double, 3>& x) {
  return {x[0] * R[0] + x[1] * R[3] + x[2] * R[6] + t[0],
          x[0] * R[1] + x[1] * R[4] + x[2] * R[7] + t[1],
          x[0] * R[2] + x[1] * R[5] + x[2] * R[8] + t[2]};
}

}  // namespace cygr::geom
