#pragma once

#include <string>
#include <vector>

#include "cygr/core/array.hpp"
#include "cygr/geom/mesh.hpp"
#include "cygr/render/png.hpp"

namespace cygr::pipeline {

/// Unpaired training corpus: oriented point clouds and RGBA renders. The
/// two lists carry no correspondence.
struct Dataset {
  std::vector<geom::PointCloud> shapes;
  std::vector<render::ImageRGBA> images;
};

/// Manifest: a structured text file with "shapes" and "images" path lists,
/// resolved relative to the manifest's directory.
Dataset load_dataset(const std::string& manifest_path);
void save_manifest(const std::string& manifest_path, const std::vector<std::string>& shape_paths,
                   const std::vector<std::string>& image_paths);

/// Oriented cloud as [N,6] rows (x, y, z, nx, ny, nz), untracked.
Array cloud_to_array(const geom::PointCloud& pc);
/// RGBA planes as [4,H,W], untracked.
Array image_to_array(const render::ImageRGBA& img);

}  // namespace cygr::pipeline
