#pragma once

#include <string>
#include <vector>

namespace cygr::render {

/// 8-bit RGBA raster held as four channel planes [4,H,W] in [0,1].
struct ImageRGBA {
  int height = 0, width = 0;
  std::vector<double> planes;  // 4*H*W

  double& at(int channel, int i, int j) {
    return planes[(static_cast<size_t>(channel) * height + i) * width + j];
  }
  double at(int channel, int i, int j) const {
    return planes[(static_cast<size_t>(channel) * height + i) * width + j];
  }
};

void write_png(const std::string& path, const ImageRGBA& img);
ImageRGBA read_png(const std::string& path);

}  // namespace cygr::render
