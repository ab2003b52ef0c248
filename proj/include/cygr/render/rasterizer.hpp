#pragma once

#include <array>
#include <vector>

#include "cygr/render/camera.hpp"

namespace cygr::render {

struct RasterSettings {
  double sigma = 1e-5;  // boundary sharpness, normalized [-1,1] screen units
  double gamma = 1e-4;  // depth-aggregation temperature
  double z_near = 0.5, z_far = 6.0;  // range for the depth weighting
  std::array<double, 3> background{0, 0, 0};
  double cutoff = 40.0;  // skip pairs with d^2/sigma beyond this outside faces
};

/// Soft rasterization to an RGBA raster [4,H,W]. Differentiable w.r.t.
/// projected vertex positions, per-vertex depths and nodal colours.
/// Per-pixel per-face influence D = sigmoid(sign * d^2 / sigma), colour is a
/// depth-softmax aggregate with a background term, alpha = 1 - prod(1 - D).
/// Faces with a behind-camera vertex or degenerate projection contribute
/// nothing.
Array soft_rasterize(const Array& xy, const Array& depth, const Array& colors,
                     const std::vector<int>& faces, int width, int height,
                     const RasterSettings& settings);

/// Full path: scene positions -> projection -> rasterization.
Array render_mesh(const Array& scene_positions, const Array& nodal_colors,
                  const std::vector<int>& faces, const Camera& cam,
                  const RasterSettings& settings);

}  // namespace cygr::render
