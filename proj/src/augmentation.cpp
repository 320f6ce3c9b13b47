#include "patcnn/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace patcnn {
namespace {

template <typename T>
Grid3<T> like(const Grid3<T>& g) {
  Grid3<T> out(g.dims(), g.spacing());
  out.set_orientation(g.orientation());
  return out;
}

template <typename T>
Grid3<T> flip_impl(const Grid3<T>& g, int axis) {
  if (axis < 0 || axis > 2) throw DomainError("flip: axis must be 0, 1 or 2");
  Grid3<T> out = like(g);
  const Dims& d = g.dims();
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t sx = axis == 0 ? d.nx - 1 - x : x;
        const std::size_t sy = axis == 1 ? d.ny - 1 - y : y;
        const std::size_t sz = axis == 2 ? d.nz - 1 - z : z;
        out(x, y, z) = g(sx, sy, sz);
      }
  return out;
}

// Maps output (x, y) to source coordinates in voxel units.
struct InplaneRotation {
  double c, s, cx, cy, sx, sy;
  InplaneRotation(const Dims& d, const Spacing& sp, double angle_deg)
      : cx((static_cast<double>(d.nx) - 1) / 2), cy((static_cast<double>(d.ny) - 1) / 2), sx(sp.x), sy(sp.y) {
    const double a = angle_deg * std::numbers::pi / 180.0;
    c = std::cos(a);
    s = std::sin(a);
  }
  std::pair<double, double> source(std::size_t x, std::size_t y) const {
    const double px = (static_cast<double>(x) - cx) * sx;
    const double py = (static_cast<double>(y) - cy) * sy;
    // inverse rotation
    const double qx = c * px + s * py;
    const double qy = -s * px + c * py;
    return {qx / sx + cx, qy / sy + cy};
  }
};

double lerp_axis_weight(double t, long& i0) {
  const double f = std::floor(t);
  i0 = static_cast<long>(f);
  return t - f;
}

}  // namespace

void AugmentPolicy::validate() const {
  if (!(p_each >= 0 && p_each <= 1)) throw DomainError("AugmentPolicy: p_each must lie in [0, 1]");
  if (!(crop_fraction > 0 && crop_fraction <= 1))
    throw DomainError("AugmentPolicy: crop_fraction must lie in (0, 1]");
  if (!(rotation_max_deg >= 0)) throw DomainError("AugmentPolicy: rotation_max_deg must be >= 0");
  if (!(rayleigh_scale >= 0)) throw DomainError("AugmentPolicy: rayleigh_scale must be >= 0");
  if (!(blur_sigma_mm >= 0)) throw DomainError("AugmentPolicy: blur_sigma_mm must be >= 0");
  if ((transforms & kFlip) && !(flip_axes[0] || flip_axes[1] || flip_axes[2]))
    throw DomainError("AugmentPolicy: flip enabled with no flip axes");
}

ImageVolume flip(const ImageVolume& v, int axis) { return flip_impl(v, axis); }
LabelMask flip(const LabelMask& m, int axis) { return flip_impl(m, axis); }

ImageVolume rotate_inplane(const ImageVolume& v, double angle_deg) {
  ImageVolume out = like(v);
  const Dims& d = v.dims();
  const InplaneRotation rot(d, v.spacing(), angle_deg);
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t x = 0; x < d.nx; ++x) {
      const auto [fx, fy] = rot.source(x, y);
      long x0, y0;
      const double wx = lerp_axis_weight(fx, x0), wy = lerp_axis_weight(fy, y0);
      for (std::size_t z = 0; z < d.nz; ++z) {
        double acc = 0;
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i) {
            const long xi = x0 + i, yj = y0 + j;
            if (xi < 0 || yj < 0 || xi >= static_cast<long>(d.nx) || yj >= static_cast<long>(d.ny)) continue;
            const double w = (i ? wx : 1 - wx) * (j ? wy : 1 - wy);
            acc += w * v(xi, yj, z);
          }
        out(x, y, z) = static_cast<float>(acc);
      }
    }
  return out;
}

LabelMask rotate_inplane(const LabelMask& m, double angle_deg) {
  LabelMask out = like(m);
  const Dims& d = m.dims();
  const InplaneRotation rot(d, m.spacing(), angle_deg);
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t x = 0; x < d.nx; ++x) {
      const auto [fx, fy] = rot.source(x, y);
      const long xi = std::lround(fx), yi = std::lround(fy);
      if (xi < 0 || yi < 0 || xi >= static_cast<long>(d.nx) || yi >= static_cast<long>(d.ny)) continue;
      for (std::size_t z = 0; z < d.nz; ++z) out(x, y, z) = m(xi, yi, z);
    }
  return out;
}

namespace {

void check_crop(const Dims& d, Index3 lo, Index3 size) {
  if (size.x == 0 || size.y == 0 || size.z == 0 || lo.x + size.x > d.nx || lo.y + size.y > d.ny ||
      lo.z + size.z > d.nz)
    throw DomainError("crop_resize: crop box outside the grid");
}

// Source coordinate (inside the crop, voxel units) for output index o.
double crop_source(std::size_t o, std::size_t lo, std::size_t size, std::size_t n) {
  const double t = (static_cast<double>(o) + 0.5) * static_cast<double>(size) / static_cast<double>(n) - 0.5;
  return static_cast<double>(lo) + std::clamp(t, 0.0, static_cast<double>(size - 1));
}

}  // namespace

ImageVolume crop_resize(const ImageVolume& v, Index3 lo, Index3 size) {
  const Dims& d = v.dims();
  check_crop(d, lo, size);
  ImageVolume out = like(v);
  auto axis = [](double t, std::size_t hi_idx, long& i0, long& i1) {
    const double f = std::floor(t);
    i0 = static_cast<long>(f);
    i1 = std::min(i0 + 1, static_cast<long>(hi_idx));
    return t - f;
  };
  for (std::size_t z = 0; z < d.nz; ++z) {
    long z0, z1;
    const double wz = axis(crop_source(z, lo.z, size.z, d.nz), lo.z + size.z - 1, z0, z1);
    for (std::size_t y = 0; y < d.ny; ++y) {
      long y0, y1;
      const double wy = axis(crop_source(y, lo.y, size.y, d.ny), lo.y + size.y - 1, y0, y1);
      for (std::size_t x = 0; x < d.nx; ++x) {
        long x0, x1;
        const double wx = axis(crop_source(x, lo.x, size.x, d.nx), lo.x + size.x - 1, x0, x1);
        const double c00 = (1 - wx) * v(x0, y0, z0) + wx * v(x1, y0, z0);
        const double c10 = (1 - wx) * v(x0, y1, z0) + wx * v(x1, y1, z0);
        const double c01 = (1 - wx) * v(x0, y0, z1) + wx * v(x1, y0, z1);
        const double c11 = (1 - wx) * v(x0, y1, z1) + wx * v(x1, y1, z1);
        const double c0 = (1 - wy) * c00 + wy * c10;
        const double c1 = (1 - wy) * c01 + wy * c11;
        out(x, y, z) = static_cast<float>((1 - wz) * c0 + wz * c1);
      }
    }
  }
  return out;
}

LabelMask crop_resize(const LabelMask& m, Index3 lo, Index3 size) {
  const Dims& d = m.dims();
  check_crop(d, lo, size);
  LabelMask out = like(m);
  for (std::size_t z = 0; z < d.nz; ++z) {
    const auto sz = static_cast<std::size_t>(std::lround(crop_source(z, lo.z, size.z, d.nz)));
    for (std::size_t y = 0; y < d.ny; ++y) {
      const auto sy = static_cast<std::size_t>(std::lround(crop_source(y, lo.y, size.y, d.ny)));
      for (std::size_t x = 0; x < d.nx; ++x) {
        const auto sx = static_cast<std::size_t>(std::lround(crop_source(x, lo.x, size.x, d.nx)));
        out(x, y, z) = m(sx, sy, sz);
      }
    }
  }
  return out;
}

ImageVolume gaussian_blur(const ImageVolume& v, double sigma_mm) {
  if (!(sigma_mm >= 0)) throw DomainError("gaussian_blur: sigma must be >= 0");
  ImageVolume out = v;
  const Dims& d = v.dims();
  std::vector<double> line;
  for (int axis = 0; axis < 3; ++axis) {
    const double sigma = sigma_mm / v.spacing()[axis];
    if (sigma < 1e-3) continue;
    const long radius = static_cast<long>(std::ceil(3 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0;
    for (long i = -radius; i <= radius; ++i) {
      kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
      total += kernel[i + radius];
    }
    for (auto& k : kernel) k /= total;

    const std::size_t n = d[axis];
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
    line.resize(n);
    auto data = out.data();
    for (std::size_t base_z = 0; base_z < (axis == 2 ? 1 : d.nz); ++base_z)
      for (std::size_t base_y = 0; base_y < (axis == 1 ? 1 : d.ny); ++base_y)
        for (std::size_t base_x = 0; base_x < (axis == 0 ? 1 : d.nx); ++base_x) {
          const std::size_t base = out.offset(base_x, base_y, base_z);
          for (std::size_t i = 0; i < n; ++i) line[i] = data[base + i * stride];
          for (std::size_t i = 0; i < n; ++i) {
            double acc = 0;
            for (long k = -radius; k <= radius; ++k) {
              const long j = std::clamp(static_cast<long>(i) + k, 0L, static_cast<long>(n) - 1);
              acc += kernel[k + radius] * line[j];
            }
            data[base + i * stride] = static_cast<float>(acc);
          }
        }
  }
  return out;
}

ImageVolume add_rayleigh_noise(const ImageVolume& v, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0)) throw DomainError("add_rayleigh_noise: sigma must be >= 0");
  ImageVolume out = v;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : out.data()) {
    const double r = sigma * std::sqrt(-2.0 * std::log1p(-u(rng)));
    x = static_cast<float>(x + r);
  }
  return out;
}

std::pair<ImageVolume, LabelMask> augment_pair(const ImageVolume& volume, const LabelMask& mask,
                                               const AugmentPolicy& policy, std::mt19937_64& rng,
                                               AugmentRecord* record) {
  policy.validate();
  require_aligned(volume, mask, "augment_pair");
  ImageVolume v = volume;
  LabelMask m = mask;
  AugmentRecord rec;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // One coin per transform, drawn whether or not the transform is enabled,
  // so enabling one transform does not reshuffle the others.
  auto fires = [&](unsigned bit) {
    const bool coin = unit(rng) < policy.p_each;
    return coin && (policy.transforms & bit);
  };

  if (fires(kRotate)) {
    const double a = (2 * unit(rng) - 1) * policy.rotation_max_deg;
    v = rotate_inplane(v, a);
    m = rotate_inplane(m, a);
    rec.applied |= kRotate;
    rec.angle_deg = a;
  }
  if (fires(kCrop)) {
    const Dims& d = v.dims();
    std::size_t lo[3], size[3];
    for (int a = 0; a < 3; ++a) {
      size[a] = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::lround(policy.crop_fraction * static_cast<double>(d[a]))), 1, d[a]);
      const std::size_t slack = d[a] - size[a];
      lo[a] = std::min(slack, static_cast<std::size_t>(unit(rng) * static_cast<double>(slack + 1)));
    }
    rec.crop_lo = {lo[0], lo[1], lo[2]};
    rec.crop_size = {size[0], size[1], size[2]};
    v = crop_resize(v, rec.crop_lo, rec.crop_size);
    m = crop_resize(m, rec.crop_lo, rec.crop_size);
    rec.applied |= kCrop;
  }
  if (fires(kFlip)) {
    std::vector<int> axes;
    for (int a = 0; a < 3; ++a)
      if (policy.flip_axes[a]) axes.push_back(a);
    const int axis = axes[std::min(axes.size() - 1, static_cast<std::size_t>(unit(rng) * axes.size()))];
    v = flip(v, axis);
    m = flip(m, axis);
    rec.applied |= kFlip;
    rec.flip_axis = axis;
  }
  if (fires(kBlur)) {
    v = gaussian_blur(v, policy.blur_sigma_mm);
    rec.applied |= kBlur;
  }
  if (fires(kRayleighNoise)) {
    const auto d = volume.data();
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    const double range = *hi > *lo ? static_cast<double>(*hi - *lo) : 1.0;
    v = add_rayleigh_noise(v, policy.rayleigh_scale * range, rng);
    rec.applied |= kRayleighNoise;
  }
  if (record) *record = rec;
  return {std::move(v), std::move(m)};
}

}  // namespace patcnn
