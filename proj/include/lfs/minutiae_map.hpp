#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "lfs/preprocessing.hpp"
#include "lfs/types.hpp"

namespace lfs {

inline constexpr int kMapChannels = 12;
inline constexpr double kChannelStep = kTwoPi / kMapChannels;
inline constexpr double kDefaultMapThreshold = 0.25;

struct EncoderParams {
  double sigma_s = 3.0;
  double sigma_o = kPi / 6.0;
};

/// h x w x 12 grid of non-negative responses; channel k is centred at k * pi / 6.
/// Row i is the pixel row (y), column j is the pixel column (x).
class MinutiaeMap {
 public:
  MinutiaeMap() = default;
  MinutiaeMap(int height, int width);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t offset(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(j)) * kMapChannels +
           static_cast<std::size_t>(k);
  }
  float at(int i, int j, int k) const noexcept { return values_[offset(i, j, k)]; }
  float& at(int i, int j, int k) noexcept { return values_[offset(i, j, k)]; }
  const std::vector<float>& values() const noexcept { return values_; }
  std::vector<float>& values() noexcept { return values_; }

  bool operator==(const MinutiaeMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

/// M(i,j,k) = sum_t exp(-d_t^2 / 2 sigma_s^2) * exp(-angle_diff(theta_t, k pi/6)^2 / 2 sigma_o^2).
/// Contributions beyond 5 sigma_s are dropped. Throws when a minutia lies outside the map.
MinutiaeMap encode_minutiae_map(std::span<const Minutia> minutiae, int height, int width,
                                const EncoderParams& params = {});

/// Vertex of the parabola through (c-1, a), (c, b), (c+1, d) in channel units,
/// mapped to radians in [0, 2pi). Falls back to c * pi / 6 unless the
/// parabola opens downward.
double parabola_peak_angle(double a, double b, double d, int c) noexcept;

/// Orientation at a detected peak from channels c-1, c, c+1 (cyclic).
double interpolate_orientation(const MinutiaeMap& map, int i, int j, int c) noexcept;

/// Minutiae at strict local maxima (5x5 spatial x 3 cyclic channels) above m_t.
/// Equal values are ordered by storage offset, so a plateau yields one peak.
std::vector<Minutia> decode_minutiae_map(const MinutiaeMap& map, double m_t = kDefaultMapThreshold);

struct VoteParams {
  double max_distance = 8.0;
  double max_angle = kPi / 6.0;
  int min_votes = 2;
};

/// Common minutiae of the five latent sets. A cluster holds at most one
/// minutia per set, all pairwise within (max_distance, max_angle); clusters
/// are taken largest first and emitted when they span min_votes sets.
std::vector<Minutia> vote_common_minutiae(std::span<const std::vector<Minutia>> sets, const VoteParams& params = {});

/// Flat binary: u32 h, u32 w, u32 12, then h * w * 12 f32 values (little-endian).
std::vector<std::uint8_t> serialize_minutiae_map(const MinutiaeMap& map);
MinutiaeMap deserialize_minutiae_map(std::span<const std::uint8_t> bytes);
void write_minutiae_map(const MinutiaeMap& map, const std::filesystem::path& path);
MinutiaeMap read_minutiae_map(const std::filesystem::path& path);

/// Binarize inside the ROI, thin, prune spurs, then crossing-number analysis.
/// The detections are returned as an encoded map.
MinutiaeMap detect_minutiae_baseline(const ProcessedImage& enhanced, const RidgeFields& fields,
                                     const EncoderParams& params = {});

}  // namespace lfs
