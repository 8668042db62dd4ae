#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lfs {

/// Single-channel image with float pixels nominally in [0, 255].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f);

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  float& at(int x, int y) noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
  /// Replicates the nearest edge pixel for out-of-range coordinates.
  float clamped(int x, int y) const noexcept;
  /// Bilinear interpolation with edge replication.
  float bilinear(double x, double y) const noexcept;

  bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB

  RgbImage(int w, int h);
  void set(int x, int y, std::array<std::uint8_t, 3> rgb) noexcept;
};

/// Binary (P5) and ASCII (P2) graymaps; 16-bit maxval is scaled to [0, 255].
GrayImage read_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

GrayImage gaussian_blur(const GrayImage& image, double sigma);
/// Mean over a (2 * radius + 1)^2 window with edge replication.
GrayImage box_mean(const GrayImage& image, int radius);
/// Clamps every pixel into [0, 255].
void clamp_to_byte_range(GrayImage& image) noexcept;

/// Pearson correlation of two equally sized pixel buffers (0 when either is flat).
double correlation(std::span<const float> a, std::span<const float> b) noexcept;

}  // namespace lfs
