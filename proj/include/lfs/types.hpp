#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace lfs {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr std::size_t kRawDescriptorLength = 192;
inline constexpr std::size_t kCompressedDescriptorLength = 96;
inline constexpr std::size_t kDefaultSubquantizers = 16;
inline constexpr std::size_t kCentroidsPerSubquantizer = 256;
inline constexpr int kBlockSize = 16;

enum class MinutiaKind : std::uint8_t { kReal = 0, kVirtual = 1 };

/// A located, oriented feature point. Coordinates are pixels (x = column,
/// y = row); theta is in [0, 2pi) and measured with atan2(dy, dx) in image
/// coordinates (y pointing down).
struct Minutia {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  MinutiaKind kind = MinutiaKind::kReal;

  bool operator==(const Minutia&) const = default;
};

enum class DescriptorStage : std::uint8_t { kRaw = 0, kCompressed = 1, kQuantized = 2 };

/// Per-minutia descriptor. Raw and compressed descriptors carry float values,
/// quantized descriptors carry one codeword index per subquantizer.
struct Descriptor {
  DescriptorStage stage = DescriptorStage::kRaw;
  std::vector<float> values;
  std::vector<std::uint8_t> codes;

  static Descriptor raw(std::vector<float> values);
  static Descriptor compressed(std::vector<float> values);
  static Descriptor quantized(std::vector<std::uint8_t> codes);

  std::size_t size() const noexcept {
    return stage == DescriptorStage::kQuantized ? codes.size() : values.size();
  }

  bool operator==(const Descriptor&) const = default;
};

/// Which extraction path produced a minutiae template. Latent values follow
/// the numbering of the latent minutiae sets (1: STFT, 3: enhanced image,
/// 6: majority-vote common set).
enum class TemplateSource : std::uint8_t {
  kReference = 0,
  kLatentStft = 1,
  kLatentEnhanced = 3,
  kLatentCommon = 6,
  kManual = 7,
};

struct MinutiaeTemplate {
  std::vector<Minutia> minutiae;
  std::vector<Descriptor> descriptors;
  TemplateSource source = TemplateSource::kReference;

  std::size_t size() const noexcept { return minutiae.size(); }
  bool empty() const noexcept { return minutiae.empty(); }
  /// Throws std::invalid_argument when counts, stages or lengths disagree.
  void validate() const;

  bool operator==(const MinutiaeTemplate&) const = default;
};

struct TextureTemplate {
  std::vector<Minutia> minutiae;
  std::vector<Descriptor> descriptors;

  std::size_t size() const noexcept { return minutiae.size(); }
  bool empty() const noexcept { return minutiae.empty(); }
  void validate() const;

  bool operator==(const TextureTemplate&) const = default;
};

/// Per-block ridge estimates. All four grids are rows x cols, stored row-major,
/// with rows = ceil(height / 16) and cols = ceil(width / 16).
struct RidgeFields {
  int block_size = kBlockSize;
  int image_width = 0;
  int image_height = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> orientation;  // ridge direction in [0, pi)
  std::vector<double> spacing;      // ridge period in pixels
  std::vector<double> quality;
  std::vector<std::uint8_t> roi;

  static RidgeFields allocate(int image_width, int image_height, int block_size = kBlockSize);

  bool empty() const noexcept { return rows == 0 || cols == 0; }
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col);
  }
  bool roi_at(int row, int col) const noexcept { return roi[index(row, col)] != 0; }
  /// ROI lookup by pixel; pixels outside the image are outside the ROI.
  bool roi_at_pixel(int x, int y) const noexcept;
  std::size_t roi_count() const noexcept;
};

struct CandidateEntry {
  std::string reference_id;
  double score = 0.0;
  std::array<double, 3> minutiae_scores{};
  double texture_score = 0.0;

  bool operator==(const CandidateEntry&) const = default;
};

/// Ranked candidates: fused score descending, reference id ascending on ties.
struct CandidateList {
  std::vector<CandidateEntry> entries;

  bool operator==(const CandidateList&) const = default;
};

/// Strict weak order used by every candidate ranking.
bool candidate_precedes(const CandidateEntry& a, const CandidateEntry& b) noexcept;

/// Sorts and truncates to the top `k` entries.
CandidateList rank_candidates(std::vector<CandidateEntry> entries, std::size_t k);

}  // namespace lfs
