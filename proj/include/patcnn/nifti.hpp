#pragma once

#include <filesystem>

#include "patcnn/volume.hpp"

namespace patcnn {

// NIfTI-1 single-file (.nii, .nii.gz) I/O. Spacing comes from pixdim[1..3];
// any stored dtype is widened to float on load and scl_slope/scl_inter are
// applied. Orientation fields are carried opaquely.
ImageVolume load_volume(const std::filesystem::path& path);

// Loads a mask; voxel values must be exactly 0 or 1 after scaling.
LabelMask load_mask(const std::filesystem::path& path);

// Writes float32 payload.
void save_volume(const ImageVolume& volume, const std::filesystem::path& path);

// Writes uint8 payload.
void save_mask(const LabelMask& mask, const std::filesystem::path& path);

}  // namespace patcnn
