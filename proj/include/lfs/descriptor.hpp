#pragma once

#include <array>
#include <span>
#include <vector>

#include "lfs/image.hpp"
#include "lfs/types.hpp"

namespace lfs {

/// Three square patches around a minutia, sampled in the minutia's frame.
/// Patch k is centred `offsets[k]` pixels ahead of the minutia along theta.
struct PatchSpec {
  std::array<double, 3> sizes{96.0, 96.0, 80.0};
  std::array<double, 3> offsets{0.0, 24.0, 0.0};
};

inline constexpr int kPatchGrid = 32;        // samples per patch side
inline constexpr int kHistogramCells = 4;    // 4 x 4 spatial cells
inline constexpr int kHistogramBins = 4;     // ridge-orientation bins over [0, pi)
inline constexpr std::size_t kPatchSummaryLength = kHistogramCells * kHistogramCells * kHistogramBins;

/// Holds a lightly smoothed copy of the image so that many minutiae can be
/// described without re-filtering.
class DescriptorExtractor {
 public:
  explicit DescriptorExtractor(const GrayImage& image, PatchSpec spec = {});

  /// Raw descriptor (192 values, unit norm). Each 64-value patch summary is
  /// centred and normalized before concatenation; samples outside the image
  /// replicate the border.
  Descriptor extract(const Minutia& minutia) const;
  std::vector<Descriptor> extract_all(std::span<const Minutia> minutiae) const;

 private:
  std::array<float, kPatchSummaryLength> patch_summary(const Minutia& m, int patch) const;

  GrayImage smooth_;
  PatchSpec spec_;
};

Descriptor extract_descriptor(const GrayImage& image, const Minutia& minutia, const PatchSpec& spec = {});

/// Cosine of two float vectors; 0 when either has zero norm.
double cosine(std::span<const float> a, std::span<const float> b) noexcept;

}  // namespace lfs
