#include "cygr/render/texture.hpp"

namespace cygr::render {

using namespace ops;

Array uv_sample(const Array& texture, const Array& uv) {
  if (texture.ndim() != 3 || uv.ndim() != 2 || uv.dim(1) != 2)
    throw std::invalid_argument("uv_sample: texture [C,H,W], uv [V,2]");
  double W = static_cast<double>(texture.dim(2)), H = static_cast<double>(texture.dim(1));
  Array u = slice_cols(uv, 0, 1);
  Array v = slice_cols(uv, 1, 2);
  Array coords = concat_cols({scale(u, W - 1.0), scale(v, H - 1.0)});
  return bilinear_gather(texture, coords);
}

Array to_unit_range(const Array& x) { return scale(add_scalar(x, 1.0), 0.5); }

Array unproject(const Array& image, const Array& scene_positions, const Camera& cam) {
  Projection p = project(scene_positions, cam);
  return bilinear_gather(image, p.xy);
}

}  // namespace cygr::render
