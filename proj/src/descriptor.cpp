#include "lfs/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <numeric>

namespace lfs {

DescriptorExtractor::DescriptorExtractor(const GrayImage& image, PatchSpec spec)
    : smooth_(gaussian_blur(image, 1.0)), spec_(spec) {
  for (double s : spec_.sizes) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("patch sizes must be positive");
    }
  }
}

std::array<float, kPatchSummaryLength> DescriptorExtractor::patch_summary(const Minutia& m, int patch) const {
  constexpr int kPad = kPatchGrid + 2;
  const double step = spec_.sizes[patch] / kPatchGrid;
  const double c = std::cos(m.theta);
  const double s = std::sin(m.theta);
  const double cx = m.x + spec_.offsets[patch] * c;
  const double cy = m.y + spec_.offsets[patch] * s;

  std::array<double, kPad * kPad> grid{};
  for (int b = 0; b < kPad; ++b) {
    const double v = (b - 1 - (kPatchGrid - 1) / 2.0) * step;
    for (int a = 0; a < kPad; ++a) {
      const double u = (a - 1 - (kPatchGrid - 1) / 2.0) * step;
      grid[b * kPad + a] = smooth_.bilinear(cx + u * c - v * s, cy + u * s + v * c);
    }
  }

  std::array<double, kPatchSummaryLength> hist{};
  constexpr double kBinWidth = kPi / kHistogramBins;
  constexpr int kCell = kPatchGrid / kHistogramCells;
  for (int b = 0; b < kPatchGrid; ++b) {
    for (int a = 0; a < kPatchGrid; ++a) {
      const int ga = a + 1;
      const int gb = b + 1;
      const double gx = grid[gb * kPad + ga + 1] - grid[gb * kPad + ga - 1];
      const double gy = grid[(gb + 1) * kPad + ga] - grid[(gb - 1) * kPad + ga];
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) {
        continue;
      }
      double o = std::atan2(gy, gx);
      if (o < 0.0) {
        o += kPi;
      }
      if (o >= kPi) {
        o -= kPi;
      }
      const double pos = o / kBinWidth - 0.5;
      const int lo = static_cast<int>(std::floor(pos));
      const double frac = pos - lo;
      const int bin0 = (lo + kHistogramBins) % kHistogramBins;
      const int bin1 = (lo + 1 + kHistogramBins) % kHistogramBins;
      const int cell = (b / kCell) * kHistogramCells + (a / kCell);
      hist[cell * kHistogramBins + bin0] += mag * (1.0 - frac);
      hist[cell * kHistogramBins + bin1] += mag * frac;
    }
  }
  const double mean = std::accumulate(hist.begin(), hist.end(), 0.0) / static_cast<double>(hist.size());
  double ss = 0.0;
  for (auto& v : hist) {
    v -= mean;
    ss += v * v;
  }
  const double norm = std::sqrt(ss);
  std::array<float, kPatchSummaryLength> out{};
  for (std::size_t i = 0; i < hist.size(); ++i) {
    out[i] = norm > 0.0 ? static_cast<float>(hist[i] / norm) : 0.0f;
  }
  return out;
}

Descriptor DescriptorExtractor::extract(const Minutia& minutia) const {
  std::vector<float> values;
  values.reserve(kRawDescriptorLength);
  for (int p = 0; p < 3; ++p) {
    const auto summary = patch_summary(minutia, p);
    values.insert(values.end(), summary.begin(), summary.end());
  }
  double ss = 0.0;
  for (float v : values) {
    ss += static_cast<double>(v) * v;
  }
  if (ss > 0.0) {
    const double inv = 1.0 / std::sqrt(ss);
    for (auto& v : values) {
      v = static_cast<float>(v * inv);
    }
  } else {
    // flat neighbourhood: any fixed unit vector keeps the norm contract
    const float u = static_cast<float>(1.0 / std::sqrt(static_cast<double>(values.size())));
    std::fill(values.begin(), values.end(), u);
  }
  return Descriptor::raw(std::move(values));
}

std::vector<Descriptor> DescriptorExtractor::extract_all(std::span<const Minutia> minutiae) const {
  std::vector<Descriptor> out;
  out.reserve(minutiae.size());
  for (const auto& m : minutiae) {
    out.push_back(extract(m));
  }
  return out;
}

Descriptor extract_descriptor(const GrayImage& image, const Minutia& minutia, const PatchSpec& spec) {
  return DescriptorExtractor(image, spec).extract(minutia);
}

double cosine(std::span<const float> a, std::span<const float> b) noexcept {
  const std::size_t n = std::min(a.size(), b.size());
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa <= 0.0 || bb <= 0.0) {
    return 0.0;
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace lfs
