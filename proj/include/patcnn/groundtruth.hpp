#pragma once

#include <cstddef>
#include <span>

#include "patcnn/volume.hpp"

namespace patcnn {

// Half-open voxel box: lo inclusive, hi exclusive.
struct BoxRegion {
  Index3 lo;
  Index3 hi;

  bool contains(std::size_t x, std::size_t y, std::size_t z) const {
    return x >= lo.x && x < hi.x && y >= lo.y && y < hi.y && z >= lo.z && z < hi.z;
  }
  std::size_t voxel_count() const { return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z); }
  bool operator==(const BoxRegion&) const = default;
};

// Two-class Otsu split over an equal-width histogram of [min, max].
//
// Samples whose bin index is <= split_bin form the low class. The reported
// threshold is the upper edge of split_bin. Class membership should be
// tested with is_high() rather than by comparing against threshold, so that
// callers and the histogram agree on boundary samples.
struct OtsuResult {
  double threshold = 0;
  double between_class_variance = 0;
  double low_mean = 0;
  double high_mean = 0;

  std::size_t split_bin = 0;
  std::size_t bins = 0;
  double range_min = 0;
  double range_max = 0;

  std::size_t bin_of(double value) const;
  bool is_high(double value) const { return bin_of(value) > split_bin; }
};

// Tightest box around the foreground, dilated by ceil(margin_mm / spacing)
// voxels per axis and clamped to the volume. Throws DomainError if the
// mask is empty.
BoxRegion bounding_box(const LabelMask& chamber_mask, double margin_mm);

// Maximises the between-class variance over every bin boundary. Ties go to
// the lowest boundary. The comparison is carried out in exact integer
// arithmetic on bin counts, so the result does not depend on summation
// order. Throws DomainError for < 2 samples or bins outside [2, 65536], and
// DegenerateInputError when all samples are equal.
OtsuResult otsu_threshold(std::span<const double> intensities, std::size_t bins = 256);

struct CandidateOptions {
  double margin_mm = 10.0;
  std::size_t bins = 256;
};

// Bright (high Otsu class) voxels inside the heart box that are not part of
// the chamber mask. Zero everywhere outside the box.
LabelMask candidate_pat_mask(const ImageVolume& volume, const LabelMask& chamber_mask,
                             const CandidateOptions& options = {});

}  // namespace patcnn
