#include "cygr/render/camera.hpp"

namespace cygr::render {

Projection project(const Array& positions, const Camera& cam) {
  using namespace ops;
  if (positions.ndim() != 2 || positions.dim(1) != 3)
    throw std::invalid_argument("project: need [V,3] positions");
  int64_t V = positions.dim(0);
  Array X = slice_cols(positions, 0, 1);
  Array Y = slice_cols(positions, 1, 2);
  Array Z = slice_cols(positions, 2, 3);
  // clamp depth used in the division so behind-camera rows stay finite
  Array Zsafe = add_scalar(relu(add_scalar(Z, -kNearClip)), kNearClip);
  Array x = add_scalar(scale(div(X, Zsafe), cam.focal_px), cam.cx);
  Array y = add_scalar(scale(div(Y, Zsafe), cam.focal_px), cam.cy);
  Projection p;
  p.xy = concat_cols({x, y});
  p.depth = Z.reshape({V});
  p.behind.resize(V);
  for (int64_t i = 0; i < V; ++i) p.behind[i] = p.depth.at(i) <= kNearClip;
  return p;
}

}  // namespace cygr::render
