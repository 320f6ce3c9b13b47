#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <utility>

#include "patcnn/volume.hpp"

namespace patcnn {

enum TransformBit : unsigned {
  kRotate = 1u << 0,
  kCrop = 1u << 1,
  kFlip = 1u << 2,
  kBlur = 1u << 3,
  kRayleighNoise = 1u << 4,
  kAllTransforms = 0x1f,
};

struct AugmentPolicy {
  double p_each = 0.1;
  double rotation_max_deg = 15.0;  // in-plane, about the slice axis
  double crop_fraction = 0.9;
  double blur_sigma_mm = 1.5;
  double rayleigh_scale = 0.05;  // fraction of the volume's intensity range
  std::uint64_t seed = 0;
  unsigned transforms = kAllTransforms;            // which transforms may fire
  std::array<bool, 3> flip_axes{true, true, false};  // axes a flip may pick from

  void validate() const;
};

// What augment_pair actually did, for logging and tests.
struct AugmentRecord {
  unsigned applied = 0;
  double angle_deg = 0;
  int flip_axis = -1;
  Index3 crop_lo;
  Index3 crop_size;
};

// Applies each enabled transform independently with probability p_each.
// Geometry (rotation, crop, flip) is shared by volume and mask; the mask
// always uses nearest-neighbour sampling. Blur and noise touch the volume
// only. Output dims always equal input dims.
std::pair<ImageVolume, LabelMask> augment_pair(const ImageVolume& volume, const LabelMask& mask,
                                               const AugmentPolicy& policy, std::mt19937_64& rng,
                                               AugmentRecord* record = nullptr);

ImageVolume flip(const ImageVolume& v, int axis);
LabelMask flip(const LabelMask& m, int axis);

// Rotation about the slice axis through the grid centre, in physical
// coordinates; samples falling outside are zero.
ImageVolume rotate_inplane(const ImageVolume& v, double angle_deg);
LabelMask rotate_inplane(const LabelMask& m, double angle_deg);

// Extracts [lo, lo + size) and resamples it back to the full grid
// (trilinear for images, nearest for masks).
ImageVolume crop_resize(const ImageVolume& v, Index3 lo, Index3 size);
LabelMask crop_resize(const LabelMask& m, Index3 lo, Index3 size);

// Separable Gaussian with sigma given in mm; edges replicate.
ImageVolume gaussian_blur(const ImageVolume& v, double sigma_mm);

// Adds independent Rayleigh(sigma) draws to every voxel.
ImageVolume add_rayleigh_noise(const ImageVolume& v, double sigma, std::mt19937_64& rng);

}  // namespace patcnn
