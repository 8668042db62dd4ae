#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "lfs/image.hpp"
#include "lfs/types.hpp"

namespace lfs {

inline constexpr int kDictionaryPatchSize = 32;
inline constexpr std::size_t kDictionaryPatchPixels = kDictionaryPatchSize * kDictionaryPatchSize;
inline constexpr double kDefaultRidgeAlpha = 300.0;
inline constexpr double kDefaultRoiThreshold = 0.35;

/// One synthesized ridge/valley element. `pattern` is the element itself
/// (cosine phase); `quadrature` is the sine-phase companion, orthogonal to
/// `pattern` with the same mean and deviation, so the response can be
/// maximized over ridge phase.
struct DictionaryElement {
  double orientation = 0.0;  // ridge direction in [0, pi)
  double spacing = 0.0;      // ridge period in pixels
  std::vector<double> pattern;
  std::vector<double> quadrature;
};

class RidgeDictionary {
 public:
  explicit RidgeDictionary(std::vector<DictionaryElement> elements) : elements_(std::move(elements)) {}

  const std::vector<DictionaryElement>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  const DictionaryElement& operator[](std::size_t i) const { return elements_.at(i); }
  /// Index of the element with exactly this label, or size() when absent.
  std::size_t find(double orientation, double spacing) const noexcept;

 private:
  std::vector<DictionaryElement> elements_;
};

/// Orientations are k * pi / orientation_count. Throws std::invalid_argument
/// unless orientation_count * spacings.size() == 90.
RidgeDictionary build_dictionary(int orientation_count, std::span<const double> spacings);

/// 10 orientations x spacings 5..13 px.
const RidgeDictionary& default_dictionary();

struct PatchSimilarity {
  std::size_t best_index = 0;
  double s_m = 0.0;
  double quality = 0.0;
};

/// Responses s_i = max_phase(P . d_i) / (||P|| + alpha) for a mean-removed patch.
std::vector<double> dictionary_responses(std::span<const double> patch, const RidgeDictionary& dict,
                                         double alpha = kDefaultRidgeAlpha);

/// Argmax over the dictionary; quality equals s_m when no raw patch is given.
PatchSimilarity patch_similarity(std::span<const double> patch, const RidgeDictionary& dict,
                                 double alpha = kDefaultRidgeAlpha);

/// Quality = s_m + cosine(standardized raw patch, standardized enhanced patch).
PatchSimilarity patch_similarity(std::span<const double> enhanced_patch, std::span<const double> raw_patch,
                                 const RidgeDictionary& dict, double alpha = kDefaultRidgeAlpha);

/// 32x32 patch with top-left corner (x0, y0), edge-replicated and scaled to
/// [0, 1] (gray / 255). Pixel scale is what alpha regularizes against.
std::vector<double> extract_patch(const GrayImage& image, int x0, int y0, int size = kDictionaryPatchSize);

/// Block (r, c) is described by the 32x32 patch centred on it (stride 16).
RidgeFields estimate_ridge_fields(const GrayImage& enhanced, const GrayImage& raw, const RidgeDictionary& dict,
                                  double alpha = kDefaultRidgeAlpha);

/// Reference-print fields: orientation and spacing from the dictionary, block
/// quality from gradient magnitude and orientation coherence, then ROI.
RidgeFields estimate_reference_fields(const GrayImage& image, const RidgeDictionary& dict,
                                      double s_r = kDefaultRoiThreshold);

/// roi = (quality > s_r), 3x3 open, 3x3 close, then the largest 8-connected
/// component when keep_largest is set.
RidgeFields segment_roi(RidgeFields fields, double s_r = kDefaultRoiThreshold, bool keep_largest = true);

/// 4-plane flat binary: "LFRF", u32 block size, u32 rows, u32 cols, then
/// orientation, spacing, quality and roi planes as f32 (little-endian).
void write_fields_binary(const RidgeFields& fields, const std::filesystem::path& path);
RidgeFields read_fields_binary(const std::filesystem::path& path);

/// Colour overlay: image in gray, ROI boundary in red, flow segments in green.
RgbImage render_fields_overlay(const GrayImage& image, const RidgeFields& fields);

}  // namespace lfs
