#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace patcnn {

// Error hierarchy shared by all modules. Callers that only care about
// "something went wrong" catch patcnn::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DegenerateInputError : DomainError {
  using DomainError::DomainError;
};

struct Dims {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Dims&) const = default;
};

// Physical voxel size in millimetres.
struct Spacing {
  double x = 1.0, y = 1.0, z = 1.0;

  double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  bool operator==(const Spacing&) const = default;
};

struct Index3 {
  std::size_t x = 0, y = 0, z = 0;
  bool operator==(const Index3&) const = default;
};

// Product of the three spacings; throws DomainError on a non-positive axis.
double voxel_volume_mm3(const Spacing& spacing);

// NIfTI orientation fields, carried through load/save untouched.
struct Orientation {
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float qfac = 1.0f;
  std::array<float, 3> quatern{};
  std::array<float, 3> qoffset{};
  std::array<float, 12> srow{};
  bool operator==(const Orientation&) const = default;
};

namespace detail {
void check_geometry(const Dims& dims, const Spacing& spacing, std::size_t data_size);
void check_finite(std::span<const float> data);
void check_binary(std::span<const std::uint8_t> data);
}  // namespace detail

// Dense 3D grid in x-fastest order (x + nx * (y + ny * z)), matching the
// on-disk NIfTI layout. Invariants are checked on construction.
template <typename T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;

  Grid3(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing), data_(dims.count(), fill) {
    detail::check_geometry(dims_, spacing_, data_.size());
    validate();
  }

  Grid3(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    detail::check_geometry(dims_, spacing_, data_.size());
    validate();
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const Orientation& orientation() const { return orientation_; }
  void set_orientation(const Orientation& o) { orientation_ = o; }

  std::size_t size() const { return data_.size(); }
  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  std::size_t offset(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  Index3 index_of(std::size_t offset) const {
    return {offset % dims_.nx, (offset / dims_.nx) % dims_.ny, offset / (dims_.nx * dims_.ny)};
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[offset(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[offset(x, y, z)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Same dims and spacing; orientation is not compared.
  template <typename U>
  bool aligned_with(const Grid3<U>& other) const {
    return dims_ == other.dims() && spacing_ == other.spacing();
  }

  bool operator==(const Grid3& other) const {
    return dims_ == other.dims_ && spacing_ == other.spacing_ && data_ == other.data_;
  }

 private:
  void validate() const {
    if constexpr (std::is_same_v<T, float>) detail::check_finite(data_);
    if constexpr (std::is_same_v<T, std::uint8_t>) detail::check_binary(data_);
  }

  Dims dims_;
  Spacing spacing_;
  Orientation orientation_;
  std::vector<T> data_;
};

// Scalar intensities in arbitrary scanner units.
using ImageVolume = Grid3<float>;
// Binary labels: 1 = PAT (or chamber, for chamber masks), 0 = background.
using LabelMask = Grid3<std::uint8_t>;

std::size_t foreground_count(const LabelMask& mask);

// Throws DomainError unless a and b share dims and spacing.
template <typename A, typename B>
void require_aligned(const Grid3<A>& a, const Grid3<B>& b, const char* what) {
  if (!a.aligned_with(b)) throw DomainError(std::string(what) + ": grids are not aligned");
}

}  // namespace patcnn
