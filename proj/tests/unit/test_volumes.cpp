#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "patcnn/nifti.hpp"
#include "patcnn/volume.hpp"
#include "test_support.hpp"

using namespace patcnn;
using patcnn::testing::TempDir;

namespace {

const Spacing kScanSpacing{1.4, 1.4, 6.0};

// Overwrites bytes of an uncompressed .nii header in place.
template <typename T>
void patch(const std::filesystem::path& p, std::streamoff offset, T value) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(offset);
  f.write(reinterpret_cast<const char*>(&value), sizeof value);
}

ImageVolume ramp(const Dims& d, const Spacing& s) {
  ImageVolume v(d, s);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 0.25f - 3.0f;
  return v;
}

}  // namespace

TEST(VoxelVolume, Examples) {
  EXPECT_EQ(voxel_volume_mm3({1, 1, 1}), 1.0);
  EXPECT_NEAR(voxel_volume_mm3(kScanSpacing), 11.76, 1e-12);
  EXPECT_EQ(voxel_volume_mm3({2, 2, 2}), 8.0);
}

TEST(VoxelVolume, RejectsNonPositive) {
  EXPECT_THROW(voxel_volume_mm3({0, 1, 1}), DomainError);
  EXPECT_THROW(voxel_volume_mm3({1, -1, 1}), DomainError);
}

TEST(VoxelVolume, MultiplicativePerAxis) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int i = 0; i < 100; ++i) {
    Spacing s{u(rng), u(rng), u(rng)};
    const double k = u(rng);
    const double base = voxel_volume_mm3(s);
    Spacing sx = s, sy = s, sz = s;
    sx.x *= k;
    sy.y *= k;
    sz.z *= k;
    EXPECT_NEAR(voxel_volume_mm3(sx), k * base, 1e-12 * k * base);
    EXPECT_NEAR(voxel_volume_mm3(sy), k * base, 1e-12 * k * base);
    EXPECT_NEAR(voxel_volume_mm3(sz), k * base, 1e-12 * k * base);
  }
}

TEST(Grid, RejectsInvalidContents) {
  EXPECT_THROW(ImageVolume({2, 2, 2}, {1, 1, 0}), DomainError);
  EXPECT_THROW(ImageVolume({2, 2, 2}, {1, 1, 1}, std::vector<float>(7)), ShapeError);
  std::vector<float> bad(8, 0.0f);
  bad[3] = NAN;
  EXPECT_THROW(ImageVolume({2, 2, 2}, {1, 1, 1}, bad), DomainError);
  std::vector<std::uint8_t> nonbinary(8, 0);
  nonbinary[0] = 2;
  EXPECT_THROW(LabelMask({2, 2, 2}, {1, 1, 1}, nonbinary), DomainError);
}

TEST(Nifti, VolumeRoundTrip) {
  TempDir dir("vol");
  for (const char* name : {"v.nii", "v.nii.gz"}) {
    const ImageVolume v = ramp({7, 5, 3}, kScanSpacing);
    save_volume(v, dir / name);
    const ImageVolume back = load_volume(dir / name);
    EXPECT_EQ(back.dims(), v.dims());
    EXPECT_EQ(back.spacing(), kScanSpacing) << name;
    ASSERT_EQ(back.size(), v.size());
    EXPECT_EQ(std::memcmp(back.data().data(), v.data().data(), v.size() * sizeof(float)), 0);
  }
}

TEST(Nifti, SpacingReadFromHeader) {
  TempDir dir("sp");
  save_volume(ramp({4, 4, 4}, kScanSpacing), dir / "a.nii");
  const auto s = load_volume(dir / "a.nii").spacing();
  EXPECT_EQ(s.x, 1.4);
  EXPECT_EQ(s.y, 1.4);
  EXPECT_EQ(s.z, 6.0);
}

TEST(Nifti, EmptyMaskRoundTrip) {
  TempDir dir("empty");
  save_mask(LabelMask({6, 6, 6}, kScanSpacing), dir / "m.nii");
  EXPECT_EQ(foreground_count(load_mask(dir / "m.nii")), 0u);
}

TEST(Nifti, PointMaskRoundTrip) {
  TempDir dir("point");
  LabelMask m({8, 8, 8}, kScanSpacing);
  m(3, 4, 5) = 1;
  save_mask(m, dir / "m.nii.gz");
  const LabelMask back = load_mask(dir / "m.nii.gz");
  EXPECT_EQ(foreground_count(back), 1u);
  EXPECT_EQ(back(3, 4, 5), 1);
}

TEST(Nifti, RandomMaskRoundTripIsElementwiseEqual) {
  TempDir dir("rand");
  std::mt19937_64 rng(7);
  const LabelMask m = patcnn::testing::random_mask({13, 11, 9}, kScanSpacing, 0.3, rng);
  save_mask(m, dir / "m.nii");
  const LabelMask once = load_mask(dir / "m.nii");
  EXPECT_TRUE(once == m);
  save_mask(once, dir / "m2.nii");
  EXPECT_TRUE(load_mask(dir / "m2.nii") == m);
}

TEST(Nifti, OrientationCarriedThrough) {
  TempDir dir("orient");
  ImageVolume v = ramp({3, 3, 3}, {1, 1, 1});
  Orientation o;
  o.qform_code = 1;
  o.sform_code = 2;
  o.qfac = -1;
  o.quatern = {0.1f, 0.2f, 0.3f};
  o.qoffset = {-10, 20, 30};
  for (int i = 0; i < 12; ++i) o.srow[i] = static_cast<float>(i) * 0.5f;
  v.set_orientation(o);
  save_volume(v, dir / "o.nii");
  EXPECT_EQ(load_volume(dir / "o.nii").orientation(), o);
}

TEST(Nifti, MissingFileIsIoError) {
  TempDir dir("missing");
  EXPECT_THROW(load_volume(dir / "nope.nii"), IoError);
}

TEST(Nifti, UnwritablePathIsIoError) {
  TempDir dir("unwritable");
  EXPECT_THROW(save_mask(LabelMask({2, 2, 2}, {1, 1, 1}), dir / "no" / "such" / "dir" / "m.nii"), IoError);
}

TEST(Nifti, FourDimensionalFileIsFormatError) {
  TempDir dir("4d");
  const auto p = dir / "a.nii";
  save_volume(ramp({4, 4, 2}, {1, 1, 1}), p);
  // dim[0] = 4, dim[3] = 1, dim[4] = 2: same payload size, but 4D.
  patch<std::int16_t>(p, 40, 4);
  patch<std::int16_t>(p, 46, 1);
  patch<std::int16_t>(p, 48, 2);
  EXPECT_THROW(load_volume(p), FormatError);
}

TEST(Nifti, NonPositiveSpacingIsFormatError) {
  TempDir dir("badsp");
  const auto p = dir / "a.nii";
  save_volume(ramp({4, 4, 2}, {1, 1, 1}), p);
  patch<float>(p, 84, 0.0f);
  EXPECT_THROW(load_volume(p), FormatError);
  patch<float>(p, 84, -1.0f);
  EXPECT_THROW(load_volume(p), FormatError);
}

TEST(Nifti, NonBinaryMaskPayloadIsFormatError) {
  TempDir dir("nonbin");
  const auto p = dir / "a.nii";
  save_volume(ramp({4, 4, 2}, {1, 1, 1}), p);
  EXPECT_THROW(load_mask(p), FormatError);
}

TEST(Nifti, NotNiftiIsFormatError) {
  TempDir dir("junk");
  std::ofstream(dir / "x.nii") << "definitely not a nifti header";
  EXPECT_THROW(load_volume(dir / "x.nii"), FormatError);
}
