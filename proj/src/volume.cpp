#include "patcnn/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace patcnn {

double voxel_volume_mm3(const Spacing& spacing) {
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0))
    throw DomainError("voxel_volume_mm3: spacing must be strictly positive");
  return spacing.x * spacing.y * spacing.z;
}

std::size_t foreground_count(const LabelMask& mask) {
  const auto d = mask.data();
  return static_cast<std::size_t>(std::count(d.begin(), d.end(), std::uint8_t{1}));
}

namespace detail {

void check_geometry(const Dims& dims, const Spacing& spacing, std::size_t data_size) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) throw DomainError("grid dims must be non-zero");
  if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0) || !std::isfinite(spacing.x) ||
      !std::isfinite(spacing.y) || !std::isfinite(spacing.z))
    throw DomainError("grid spacing must be finite and strictly positive");
  if (dims.count() != data_size) throw ShapeError("grid data size does not match dims");
}

void check_finite(std::span<const float> data) {
  if (!std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); }))
    throw DomainError("image intensities must be finite");
}

void check_binary(std::span<const std::uint8_t> data) {
  if (!std::all_of(data.begin(), data.end(), [](std::uint8_t v) { return v <= 1; }))
    throw DomainError("label mask values must be 0 or 1");
}

}  // namespace detail
}  // namespace patcnn
