#pragma once

#include <string_view>

#include "lfs/image.hpp"
#include "lfs/types.hpp"

namespace lfs {

enum class PipelineTag : std::uint8_t {
  kDecomposed,
  kStft,
  kContrastStft,
  kGabor,
  kContrastGabor,
  kContrast,
};

std::string_view pipeline_tag_name(PipelineTag tag) noexcept;

struct ProcessedImage {
  GrayImage pixels;
  PipelineTag tag = PipelineTag::kDecomposed;
};

inline constexpr double kDecompositionSigma = 6.0;
inline constexpr int kStftWindow = 32;
inline constexpr int kStftStride = 16;

/// Texture component: image minus a Gaussian cartoon, rescaled symmetrically
/// around mid-gray. A constant image maps to constant 127.5.
ProcessedImage decompose_texture(const GrayImage& image);

/// Block-wise STFT enhancement (32x32 raised-cosine windows, stride 16).
/// Each window keeps the band around its dominant (smoothed) orientation and
/// frequency; weakly oriented windows are attenuated. A constant image is
/// returned unchanged.
ProcessedImage stft_enhance(const GrayImage& image);

/// Per-block oriented Gabor filtering tuned to the block's orientation and
/// spacing. Pixels outside the ROI keep their input value.
ProcessedImage gabor_enhance(const GrayImage& image, const RidgeFields& fields);

/// Local affine stretch: each 32x32 tile is mapped by the min/max of the
/// 64x64 context around it (clipped to the image).
ProcessedImage contrast_enhance(const GrayImage& image);

}  // namespace lfs
