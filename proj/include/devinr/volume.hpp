#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "devinr/errors.hpp"

namespace devinr {

// d-dimensional scalar image, d in {2, 3}. Intensities are kept in the
// canonical [0, 1] range with background exactly 0; spacing is cm per voxel.
// Storage is row-major with the LAST axis fastest.
struct VolumeImage {
  std::vector<std::uint32_t> shape;
  std::vector<float> spacing;
  std::vector<float> data;

  static constexpr float kBackground = 0.0f;

  std::size_t dims() const { return shape.size(); }

  std::size_t voxel_count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }

  float& at(std::size_t flat) { return data[flat]; }
  float at(std::size_t flat) const { return data[flat]; }

  void validate() const {
    if (dims() != 2 && dims() != 3)
      throw DataError("VolumeImage: dimension count must be 2 or 3, got " +
                      std::to_string(dims()));
    if (spacing.size() != dims())
      throw DataError("VolumeImage: spacing/shape rank mismatch");
    for (float s : spacing)
      if (!(s > 0.0f))
        throw DataError("VolumeImage: spacing must be strictly positive");
    if (data.size() != voxel_count())
      throw DataError("VolumeImage: data size does not match shape");
    for (float v : data)
      if (!std::isfinite(v))
        throw DataError("VolumeImage: non-finite intensity");
  }
};

struct ForegroundMask {
  std::vector<std::uint32_t> shape;
  std::vector<std::uint8_t> bits;  // one per voxel, row-major like the image

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }

  void validate_against(const VolumeImage& img) const {
    if (shape != img.shape)
      throw DataError("ForegroundMask: shape does not match image");
    if (bits.size() != img.voxel_count())
      throw DataError("ForegroundMask: bit count does not match shape");
  }
};

// Default mask convention: everything above exact zero is foreground
// (background voxels are exactly 0 after normalization).
inline ForegroundMask foreground_from_image(const VolumeImage& img) {
  ForegroundMask m;
  m.shape = img.shape;
  m.bits.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    m.bits[i] = img.data[i] > 0.0f ? 1 : 0;
  return m;
}

// Voxel-center coordinate: x_k = (index_k + 0.5)/shape_k - 0.5, so centers
// span (-0.5, 0.5) symmetrically.
inline double coordinate_of_axis(std::uint32_t index, std::uint32_t extent) {
  if (index >= extent)
    throw DataError("coordinate_of: index " + std::to_string(index) +
                    " out of range for axis of length " + std::to_string(extent));
  return (static_cast<double>(index) + 0.5) / static_cast<double>(extent) - 0.5;
}

inline std::vector<double> coordinate_of(const std::vector<std::uint32_t>& index,
                                         const std::vector<std::uint32_t>& shape) {
  if (index.size() != shape.size())
    throw DataError("coordinate_of: index rank does not match shape");
  std::vector<double> x(index.size());
  for (std::size_t k = 0; k < index.size(); ++k)
    x[k] = coordinate_of_axis(index[k], shape[k]);
  return x;
}

// Normalized time: PMA in weeks divided by 100.
inline double normalize_time(double pma_weeks) {
  if (!(pma_weeks > 0.0))
    throw DataError("normalize_time: postmenstrual age must be positive");
  return pma_weeks / 100.0;
}

// Percentile by linear interpolation on a sorted array (rank p/100*(n-1)).
inline double percentile_sorted(const std::vector<float>& sorted, double p) {
  if (sorted.empty()) throw DataError("percentile of empty set");
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double w = rank - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

// Maps the foreground's [1st, 99th] percentile range linearly onto [0, 1],
// clamps, and zeroes the background.
inline VolumeImage normalize_intensity(const VolumeImage& img,
                                       const ForegroundMask& mask) {
  mask.validate_against(img);
  std::vector<float> fg;
  fg.reserve(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i)
    if (mask.bits[i]) fg.push_back(img.data[i]);
  if (fg.empty()) throw DataError("normalize_intensity: empty foreground mask");
  std::sort(fg.begin(), fg.end());
  const double p1 = percentile_sorted(fg, 1.0);
  const double p99 = percentile_sorted(fg, 99.0);
  if (!(p99 > p1))
    throw DataError("normalize_intensity: degenerate foreground range");
  VolumeImage out = img;
  const double scale = 1.0 / (p99 - p1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!mask.bits[i]) {
      out.data[i] = 0.0f;
    } else {
      const double v = (static_cast<double>(img.data[i]) - p1) * scale;
      out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

// --- NDV1 on-disk volume format ------------------------------------------
//
//   magic   7 bytes  "NDVOL1\0"
//   d       u8       dimension count (2 or 3)
//   shape   d x u32  little-endian voxel counts
//   spacing d x f32  little-endian cm per voxel
//   data    f32[*]   little-endian intensities, row-major, last axis fastest
//
// The layout is fixed so round trips are bit-exact.

namespace detail {
inline constexpr char kNdvMagic[7] = {'N', 'D', 'V', 'O', 'L', '1', '\0'};

static_assert(sizeof(float) == 4, "NDV1 requires 32-bit float");

inline void write_exact(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_exact(std::ifstream& f, void* p, std::size_t n,
                       const char* what) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(f.gcount()) != n)
    throw DataError(std::string("NDV1: truncated file while reading ") + what);
}
}  // namespace detail

inline void save_volume(const VolumeImage& img, const std::string& path) {
  img.validate();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  detail::write_exact(f, detail::kNdvMagic, sizeof(detail::kNdvMagic));
  const auto d = static_cast<std::uint8_t>(img.dims());
  detail::write_exact(f, &d, 1);
  detail::write_exact(f, img.shape.data(), 4 * img.shape.size());
  detail::write_exact(f, img.spacing.data(), 4 * img.spacing.size());
  detail::write_exact(f, img.data.data(), 4 * img.data.size());
  if (!f) throw DataError("write failed: " + path);
}

inline VolumeImage load_volume(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  char magic[7];
  detail::read_exact(f, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, detail::kNdvMagic, sizeof(magic)) != 0)
    throw DataError("NDV1: bad magic in " + path);
  std::uint8_t d = 0;
  detail::read_exact(f, &d, 1, "dimension count");
  if (d != 2 && d != 3)
    throw DataError("NDV1: dimension count must be 2 or 3, got " +
                    std::to_string(int(d)));
  VolumeImage img;
  img.shape.resize(d);
  img.spacing.resize(d);
  detail::read_exact(f, img.shape.data(), 4u * d, "shape");
  detail::read_exact(f, img.spacing.data(), 4u * d, "spacing");
  img.data.resize(img.voxel_count());
  detail::read_exact(f, img.data.data(), 4 * img.data.size(), "data");
  img.validate();
  return img;
}

}  // namespace devinr
