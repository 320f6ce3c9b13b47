#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "patcnn/volume.hpp"

namespace patcnn {

struct RgbImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

// Grey-scale slice z (min-max over the whole volume) with in-plane mask
// contours: truth red, prediction green, yellow where both coincide.
// Either mask may be null.
RgbImage render_slice(const ImageVolume& volume, const LabelMask* truth, const LabelMask* pred, std::size_t z);

void write_png(const RgbImage& image, const std::filesystem::path& path);

// One PNG per slice, named <prefix>_zNNN.png. Returns the written paths.
std::vector<std::filesystem::path> write_overlays(const ImageVolume& volume, const LabelMask* truth,
                                                  const LabelMask* pred, const std::filesystem::path& dir,
                                                  const std::string& prefix);

}  // namespace patcnn
