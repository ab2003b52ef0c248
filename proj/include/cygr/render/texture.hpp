#pragma once

#include "cygr/render/camera.hpp"

namespace cygr::render {

/// Nodal colours by bilinear lookup of a texture image [3,H,W] (values in
/// [0,1]) at uv coordinates [V,2] in [0,1]^2; (0,0) addresses the first
/// texel, align-corners mapping.
Array uv_sample(const Array& texture, const Array& uv);

/// Maps a [-1,1] tanh output to [0,1] colour range.
Array to_unit_range(const Array& x);

/// U_i = bilinear sample of the image [C,H,W] at the projection of vertex i.
/// Every vertex is sampled regardless of visibility; out-of-frame
/// projections clamp to the border.
Array unproject(const Array& image, const Array& scene_positions, const Camera& cam);

}  // namespace cygr::render
