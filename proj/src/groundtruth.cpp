#include "patcnn/groundtruth.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace patcnn {

std::size_t OtsuResult::bin_of(double value) const {
  const double t = (value - range_min) / (range_max - range_min) * static_cast<double>(bins);
  if (!(t > 0)) return 0;
  const auto b = static_cast<std::size_t>(std::floor(t));
  return std::min(b, bins - 1);
}

BoxRegion bounding_box(const LabelMask& chamber_mask, double margin_mm) {
  if (!(margin_mm >= 0) || !std::isfinite(margin_mm))
    throw DomainError("bounding_box: margin must be a non-negative finite length");
  const Dims& d = chamber_mask.dims();
  std::size_t lo[3] = {d.nx, d.ny, d.nz};
  std::size_t hi[3] = {0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!chamber_mask(x, y, z)) continue;
        any = true;
        const std::size_t p[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a] + 1);
        }
      }
  if (!any) throw DomainError("bounding_box: no heart found (chamber mask is empty)");

  for (int a = 0; a < 3; ++a) {
    const auto grow = static_cast<std::size_t>(std::ceil(margin_mm / chamber_mask.spacing()[a]));
    lo[a] = lo[a] > grow ? lo[a] - grow : 0;
    hi[a] = std::min(hi[a] + grow, d[a]);
  }
  return {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
}

OtsuResult otsu_threshold(std::span<const double> intensities, std::size_t bins) {
  using boost::multiprecision::int256_t;

  if (intensities.size() < 2) throw DomainError("otsu_threshold: need at least two samples");
  if (intensities.size() > (std::size_t{1} << 31))
    throw DomainError("otsu_threshold: too many samples");
  if (bins < 2 || bins > 65536) throw DomainError("otsu_threshold: bins must lie in [2, 65536]");
  for (double v : intensities)
    if (!std::isfinite(v)) throw DomainError("otsu_threshold: non-finite intensity");

  const auto [mn, mx] = std::minmax_element(intensities.begin(), intensities.end());
  if (*mn == *mx) throw DegenerateInputError("otsu_threshold: input has no intensity contrast");

  OtsuResult r;
  r.bins = bins;
  r.range_min = *mn;
  r.range_max = *mx;

  std::vector<std::int64_t> hist(bins, 0);
  for (double v : intensities) ++hist[r.bin_of(v)];

  // With bin index as the class value, sigma_b^2 is proportional to
  // (N*m0 - M*w0)^2 / (w0*w1); the constant factor does not move the argmax.
  std::int64_t total_w = 0, total_m = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    total_w += hist[b];
    total_m += hist[b] * static_cast<std::int64_t>(b);
  }

  int256_t best_num = -1, best_den = 1;
  std::int64_t w0 = 0, m0 = 0;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    w0 += hist[k];
    m0 += hist[k] * static_cast<std::int64_t>(k);
    const std::int64_t w1 = total_w - w0;
    int256_t num = 0, den = 1;
    if (w0 > 0 && w1 > 0) {
      const int256_t diff = int256_t(total_w) * m0 - int256_t(total_m) * w0;
      num = diff * diff;
      den = int256_t(w0) * w1;
    }
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      r.split_bin = k;
    }
  }

  const double width = (r.range_max - r.range_min) / static_cast<double>(bins);
  r.threshold = r.range_min + static_cast<double>(r.split_bin + 1) * width;

  double s0 = 0, s1 = 0;
  std::size_t n0 = 0, n1 = 0;
  for (double v : intensities) {
    if (r.is_high(v)) {
      s1 += v;
      ++n1;
    } else {
      s0 += v;
      ++n0;
    }
  }
  r.low_mean = n0 ? s0 / n0 : r.range_min;
  r.high_mean = n1 ? s1 / n1 : r.range_max;
  const double n = static_cast<double>(intensities.size());
  const double dm = r.high_mean - r.low_mean;
  r.between_class_variance = (n0 / n) * (n1 / n) * dm * dm;
  return r;
}

LabelMask candidate_pat_mask(const ImageVolume& volume, const LabelMask& chamber_mask,
                             const CandidateOptions& options) {
  require_aligned(volume, chamber_mask, "candidate_pat_mask");
  const BoxRegion box = bounding_box(chamber_mask, options.margin_mm);

  LabelMask out(volume.dims(), volume.spacing());
  out.set_orientation(volume.orientation());

  std::vector<double> samples;
  samples.reserve(box.voxel_count());
  bool any_outside_chambers = false;
  for (std::size_t z = box.lo.z; z < box.hi.z; ++z)
    for (std::size_t y = box.lo.y; y < box.hi.y; ++y)
      for (std::size_t x = box.lo.x; x < box.hi.x; ++x) {
        samples.push_back(volume(x, y, z));
        any_outside_chambers = any_outside_chambers || !chamber_mask(x, y, z);
      }
  if (!any_outside_chambers) return out;

  const OtsuResult otsu = otsu_threshold(samples, options.bins);
  for (std::size_t z = box.lo.z; z < box.hi.z; ++z)
    for (std::size_t y = box.lo.y; y < box.hi.y; ++y)
      for (std::size_t x = box.lo.x; x < box.hi.x; ++x)
        if (!chamber_mask(x, y, z) && otsu.is_high(volume(x, y, z))) out(x, y, z) = 1;
  return out;
}

}  // namespace patcnn
