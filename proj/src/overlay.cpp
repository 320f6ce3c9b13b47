#include "patcnn/overlay.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace patcnn {
namespace {

bool on_contour(const LabelMask& m, std::size_t x, std::size_t y, std::size_t z) {
  if (!m(x, y, z)) return false;
  const Dims& d = m.dims();
  if (x == 0 || y == 0 || x + 1 == d.nx || y + 1 == d.ny) return true;
  return !m(x - 1, y, z) || !m(x + 1, y, z) || !m(x, y - 1, z) || !m(x, y + 1, z);
}

}  // namespace

RgbImage render_slice(const ImageVolume& volume, const LabelMask* truth, const LabelMask* pred, std::size_t z) {
  const Dims& d = volume.dims();
  if (z >= d.nz) throw DomainError("render_slice: slice index out of range");
  if (truth) require_aligned(volume, *truth, "render_slice");
  if (pred) require_aligned(volume, *pred, "render_slice");
  const auto data = volume.data();
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const double range = *hi > *lo ? static_cast<double>(*hi - *lo) : 1.0;

  RgbImage img{d.nx, d.ny, std::vector<std::uint8_t>(d.nx * d.ny * 3)};
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t x = 0; x < d.nx; ++x) {
      std::uint8_t* px = &img.pixels[(y * d.nx + x) * 3];
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * (volume(x, y, z) - *lo) / range));
      px[0] = px[1] = px[2] = g;
      const bool t = truth && on_contour(*truth, x, y, z);
      const bool p = pred && on_contour(*pred, x, y, z);
      if (t || p) {
        px[0] = t ? 255 : 0;
        px[1] = p ? 255 : 0;
        px[2] = 0;
      }
    }
  return img;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(&image.pixels[y * image.width * 3]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::filesystem::path> write_overlays(const ImageVolume& volume, const LabelMask* truth,
                                                  const LabelMask* pred, const std::filesystem::path& dir,
                                                  const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (std::size_t z = 0; z < volume.dims().nz; ++z) {
    char name[64];
    std::snprintf(name, sizeof name, "_z%03zu.png", z);
    const auto path = dir / (prefix + name);
    write_png(render_slice(volume, truth, pred, z), path);
    out.push_back(path);
  }
  return out;
}

}  // namespace patcnn
