#include "cygr/pipeline/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cygr::pipeline {

using nlohmann::json;

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("dataset: cannot read " + manifest_path);
  json j = json::parse(in);
  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  Dataset ds;
  for (const std::string& p : j.at("shapes").get<std::vector<std::string>>())
    ds.shapes.push_back(geom::read_point_cloud(resolve(p)));
  for (const std::string& p : j.at("images").get<std::vector<std::string>>())
    ds.images.push_back(render::read_png(resolve(p)));
  if (ds.shapes.empty()) throw std::runtime_error("dataset: no shapes");
  if (ds.images.empty()) throw std::runtime_error("dataset: no images");
  return ds;
}

void save_manifest(const std::string& manifest_path, const std::vector<std::string>& shape_paths,
                   const std::vector<std::string>& image_paths) {
  json j;
  j["shapes"] = shape_paths;
  j["images"] = image_paths;
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("dataset: cannot write " + manifest_path);
  out << j.dump(2) << "\n";
}

Array cloud_to_array(const geom::PointCloud& pc) {
  int64_t n = pc.size();
  std::vector<double> rows(static_cast<size_t>(n) * 6);
  for (int64_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      rows[i * 6 + d] = pc.points[i * 3 + d];
      rows[i * 6 + 3 + d] = pc.normals[i * 3 + d];
    }
  }
  return Array::constant({n, 6}, std::move(rows));
}

Array image_to_array(const render::ImageRGBA& img) {
  return Array::constant({4, img.height, img.width}, img.planes);
}

}  // namespace cygr::pipeline
