#pragma once

#include <cstdint>
#include <vector>

#include "lfs/image.hpp"
#include "lfs/types.hpp"

namespace lfs {

/// Binary raster, 1 = ridge pixel.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  bool get(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height && pixels[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) noexcept { pixels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const noexcept;

  bool operator==(const BinaryImage&) const = default;
};

/// Dark ridges: pixel below its local mean (after light smoothing), inside the ROI.
BinaryImage binarize_ridges(const GrayImage& image, const RidgeFields& fields);

/// Zhang-Suen thinning to a one-pixel-wide 8-connected skeleton.
BinaryImage thin(BinaryImage image);

/// Removes branches that run from an end point to a junction (or to another
/// end point) in fewer than min_length pixels.
BinaryImage prune_spurs(BinaryImage skeleton, int min_length = 8);

/// 0.5 * sum |P_k - P_{k+1}| over the cyclic 8-neighbourhood.
int crossing_number(const BinaryImage& skeleton, int x, int y) noexcept;

struct SkeletonParams {
  int trace_length = 8;
  double border_margin = 12.0;
  double min_separation = 6.0;
};

/// Endings (crossing number 1) and bifurcations (3) with traced directions.
/// Endings point away from their ridge; bifurcations point along the bisector
/// of their two closest branches. Detections near the ROI or image border and
/// pairs closer than min_separation are removed.
std::vector<Minutia> skeleton_minutiae(const BinaryImage& skeleton, const RidgeFields& fields,
                                       const SkeletonParams& params = {});

}  // namespace lfs
