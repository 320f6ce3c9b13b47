#include "patcnn/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>

namespace patcnn {
namespace {

// The float32 header value read back as the shortest decimal that
// reproduces it, so 1.4 written as float comes back as the double 1.4.
double widen_decimal(float f) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf - 1, f);
  *r.ptr = '\0';
  return std::strtod(buf, nullptr);
}

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

enum DataType : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kComplex64 = 32,
  kFloat64 = 64,
  kRgb24 = 128,
  kInt8 = 256,
  kUInt16 = 512,
  kUInt32 = 768,
  kInt64 = 1024,
  kUInt64 = 1280,
};

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUInt8:
    case kInt8:
      return 1;
    case kInt16:
    case kUInt16:
      return 2;
    case kInt32:
    case kUInt32:
    case kFloat32:
      return 4;
    case kFloat64:
    case kInt64:
    case kUInt64:
      return 8;
    default:
      return 0;
  }
}

bool has_suffix(const std::filesystem::path& p, std::string_view suffix) {
  const std::string s = p.string();
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Little helper over a raw header buffer with optional byte swapping.
class HeaderView {
 public:
  HeaderView(const unsigned char* bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t off) const {
    unsigned char tmp[sizeof(T)];
    std::memcpy(tmp, bytes_ + off, sizeof(T));
    if (swap_) std::reverse(tmp, tmp + sizeof(T));
    T v;
    std::memcpy(&v, tmp, sizeof(T));
    return v;
  }

 private:
  const unsigned char* bytes_;
  bool swap_;
};

template <typename T>
void put(std::vector<unsigned char>& buf, std::size_t off, T v) {
  static_assert(std::endian::native == std::endian::little, "writer assumes little-endian host");
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

struct GzFile {
  gzFile f = nullptr;
  ~GzFile() {
    if (f) gzclose(f);
  }
};

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  GzFile in;
  in.f = gzopen(path.string().c_str(), "rb");
  if (!in.f) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> out;
  std::vector<unsigned char> chunk(1 << 16);
  for (;;) {
    const int n = gzread(in.f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) throw IoError("read error in " + path.string());
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  return out;
}

void write_all(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (has_suffix(path, ".gz")) {
    GzFile out;
    out.f = gzopen(path.string().c_str(), "wb6");
    if (!out.f) throw IoError("cannot write " + path.string());
    if (gzwrite(out.f, bytes.data(), static_cast<unsigned>(bytes.size())) != static_cast<int>(bytes.size()))
      throw IoError("write error in " + path.string());
    if (gzclose(out.f) != Z_OK) {
      out.f = nullptr;
      throw IoError("write error in " + path.string());
    }
    out.f = nullptr;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write error in " + path.string());
}

struct RawImage {
  Dims dims;
  Spacing spacing;
  Orientation orientation;
  std::vector<double> values;
};

RawImage parse(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() < kHeaderSize) throw FormatError(path.string() + ": truncated NIfTI header");

  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool swap = false;
  if (sizeof_hdr != kHeaderSize) {
    swap = true;
    if (HeaderView(bytes.data(), true).get<std::int32_t>(0) != kHeaderSize)
      throw FormatError(path.string() + ": not a NIfTI-1 file (sizeof_hdr)");
  }
  if (std::memcmp(bytes.data() + 344, "n+1", 4) != 0)
    throw FormatError(path.string() + ": only single-file NIfTI-1 (magic n+1) is supported");

  const HeaderView h(bytes.data(), swap);
  std::array<std::int16_t, 8> dim{};
  for (int i = 0; i < 8; ++i) dim[i] = h.get<std::int16_t>(40 + 2 * i);
  if (dim[0] < 3 || dim[0] > 7) throw FormatError(path.string() + ": expected a 3D image");
  for (int i = 4; i <= dim[0]; ++i) {
    if (dim[i] > 1)
      throw FormatError(path.string() + ": expected a 3D scalar image, found extent " +
                        std::to_string(dim[i]) + " along dim " + std::to_string(i));
  }
  for (int i = 1; i <= 3; ++i)
    if (dim[i] < 1) throw FormatError(path.string() + ": non-positive image extent");

  const auto datatype = h.get<std::int16_t>(70);
  const int bpv = bytes_per_voxel(datatype);
  if (bpv == 0)
    throw FormatError(path.string() + ": unsupported or non-scalar datatype " + std::to_string(datatype));

  RawImage img;
  img.dims = {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
              static_cast<std::size_t>(dim[3])};
  const float px = h.get<float>(80), py = h.get<float>(84), pz = h.get<float>(88);
  if (!(px > 0 && py > 0 && pz > 0) || !std::isfinite(px) || !std::isfinite(py) || !std::isfinite(pz))
    throw FormatError(path.string() + ": non-positive voxel spacing in pixdim");
  img.spacing = {widen_decimal(px), widen_decimal(py), widen_decimal(pz)};

  auto& o = img.orientation;
  o.qfac = h.get<float>(76);
  o.qform_code = h.get<std::int16_t>(252);
  o.sform_code = h.get<std::int16_t>(254);
  for (int i = 0; i < 3; ++i) o.quatern[i] = h.get<float>(256 + 4 * i);
  for (int i = 0; i < 3; ++i) o.qoffset[i] = h.get<float>(268 + 4 * i);
  for (int i = 0; i < 12; ++i) o.srow[i] = h.get<float>(280 + 4 * i);

  const auto vox_offset = static_cast<std::size_t>(h.get<float>(108));
  const std::size_t n = img.dims.count();
  if (vox_offset < kHeaderSize || bytes.size() < vox_offset + n * bpv)
    throw FormatError(path.string() + ": payload shorter than header declares");

  float slope = h.get<float>(112);
  float inter = h.get<float>(116);
  const bool scaled = slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f);
  if (!std::isfinite(inter)) inter = 0.0f;

  const HeaderView payload(bytes.data() + vox_offset, swap);
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = i * bpv;
    double v = 0;
    switch (datatype) {
      case kUInt8: v = payload.get<std::uint8_t>(off); break;
      case kInt8: v = payload.get<std::int8_t>(off); break;
      case kInt16: v = payload.get<std::int16_t>(off); break;
      case kUInt16: v = payload.get<std::uint16_t>(off); break;
      case kInt32: v = payload.get<std::int32_t>(off); break;
      case kUInt32: v = payload.get<std::uint32_t>(off); break;
      case kFloat32: v = payload.get<float>(off); break;
      case kFloat64: v = payload.get<double>(off); break;
      case kInt64: v = static_cast<double>(payload.get<std::int64_t>(off)); break;
      case kUInt64: v = static_cast<double>(payload.get<std::uint64_t>(off)); break;
    }
    img.values[i] = scaled ? slope * v + inter : v;
  }
  return img;
}

std::vector<unsigned char> make_header(const Dims& dims, const Spacing& spacing,
                                       const Orientation& o, std::int16_t datatype) {
  std::vector<unsigned char> buf(kVoxOffset, 0);
  put<std::int32_t>(buf, 0, kHeaderSize);
  buf[38] = 'r';
  put<std::int16_t>(buf, 40, 3);
  put<std::int16_t>(buf, 42, static_cast<std::int16_t>(dims.nx));
  put<std::int16_t>(buf, 44, static_cast<std::int16_t>(dims.ny));
  put<std::int16_t>(buf, 46, static_cast<std::int16_t>(dims.nz));
  for (int i = 4; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, 1);
  put<std::int16_t>(buf, 70, datatype);
  put<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * bytes_per_voxel(datatype)));
  put<float>(buf, 76, o.qfac);
  put<float>(buf, 80, static_cast<float>(spacing.x));
  put<float>(buf, 84, static_cast<float>(spacing.y));
  put<float>(buf, 88, static_cast<float>(spacing.z));
  for (int i = 4; i < 8; ++i) put<float>(buf, 76 + 4 * i, 1.0f);
  put<float>(buf, 108, static_cast<float>(kVoxOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  buf[123] = 2;  // xyzt_units: mm
  put<std::int16_t>(buf, 252, o.qform_code);
  put<std::int16_t>(buf, 254, o.sform_code);
  for (int i = 0; i < 3; ++i) put<float>(buf, 256 + 4 * i, o.quatern[i]);
  for (int i = 0; i < 3; ++i) put<float>(buf, 268 + 4 * i, o.qoffset[i]);
  for (int i = 0; i < 12; ++i) put<float>(buf, 280 + 4 * i, o.srow[i]);
  std::memcpy(buf.data() + 344, "n+1", 4);
  return buf;
}

void check_writable_dims(const Dims& d) {
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767)
    throw FormatError("NIfTI-1 extents are limited to 32767 voxels per axis");
}

}  // namespace

ImageVolume load_volume(const std::filesystem::path& path) {
  RawImage raw = parse(path);
  std::vector<float> data(raw.values.size());
  std::transform(raw.values.begin(), raw.values.end(), data.begin(),
                 [](double v) { return static_cast<float>(v); });
  if (!std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); }))
    throw FormatError(path.string() + ": non-finite intensities");
  ImageVolume vol(raw.dims, raw.spacing, std::move(data));
  vol.set_orientation(raw.orientation);
  return vol;
}

LabelMask load_mask(const std::filesystem::path& path) {
  RawImage raw = parse(path);
  std::vector<std::uint8_t> data(raw.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = raw.values[i];
    if (v != 0.0 && v != 1.0) throw FormatError(path.string() + ": mask values must be 0 or 1");
    data[i] = static_cast<std::uint8_t>(v);
  }
  LabelMask mask(raw.dims, raw.spacing, std::move(data));
  mask.set_orientation(raw.orientation);
  return mask;
}

void save_volume(const ImageVolume& volume, const std::filesystem::path& path) {
  check_writable_dims(volume.dims());
  auto buf = make_header(volume.dims(), volume.spacing(), volume.orientation(), kFloat32);
  const auto data = volume.data();
  const std::size_t off = buf.size();
  buf.resize(off + data.size() * sizeof(float));
  std::memcpy(buf.data() + off, data.data(), data.size() * sizeof(float));
  write_all(path, buf);
}

void save_mask(const LabelMask& mask, const std::filesystem::path& path) {
  check_writable_dims(mask.dims());
  auto buf = make_header(mask.dims(), mask.spacing(), mask.orientation(), kUInt8);
  const auto data = mask.data();
  buf.insert(buf.end(), data.begin(), data.end());
  write_all(path, buf);
}

}  // namespace patcnn
