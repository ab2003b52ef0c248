#pragma once

#include "cygr/core/array.hpp"

namespace cygr::render {

/// Pinhole camera with fixed intrinsics at the origin looking along +z,
/// x right, y down in image coordinates. Object motion carries all
/// extrinsics.
struct Camera {
  double focal_px = 112.0;
  double cx = 32.0, cy = 32.0;
  int width = 64, height = 64;
};

struct Projection {
  Array xy;     // [V,2] pixel coordinates
  Array depth;  // [V] distance along the optical axis
  std::vector<char> behind;  // depth <= near clip flag, per vertex
};

/// Perspective projection of scene positions [V,3]. Depths are clamped to a
/// small positive value inside the division so behind-camera vertices stay
/// finite; they are flagged, not errors.
Projection project(const Array& positions, const Camera& cam);

constexpr double kNearClip = 0.05;

}  // namespace cygr::render
