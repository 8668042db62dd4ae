#include "lfs/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lfs {
namespace {

void check_finite(const std::vector<float>& values) {
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("descriptor contains a non-finite value");
    }
  }
}

void validate_pairing(const std::vector<Minutia>& minutiae, const std::vector<Descriptor>& descriptors,
                      const char* what) {
  if (minutiae.size() != descriptors.size()) {
    throw std::invalid_argument(std::string(what) + ": minutiae and descriptor counts differ");
  }
  for (const auto& m : minutiae) {
    if (!(m.theta >= 0.0 && m.theta < kTwoPi) || !std::isfinite(m.x) || !std::isfinite(m.y)) {
      throw std::invalid_argument(std::string(what) + ": minutia outside its domain");
    }
  }
  if (descriptors.empty()) {
    return;
  }
  const auto stage = descriptors.front().stage;
  const auto length = descriptors.front().size();
  for (const auto& d : descriptors) {
    if (d.stage != stage || d.size() != length) {
      throw std::invalid_argument(std::string(what) + ": mixed descriptor stages or lengths");
    }
  }
}

}  // namespace

Descriptor Descriptor::raw(std::vector<float> values) {
  if (values.size() != kRawDescriptorLength) {
    throw std::invalid_argument("raw descriptor must have length 192");
  }
  check_finite(values);
  return Descriptor{DescriptorStage::kRaw, std::move(values), {}};
}

Descriptor Descriptor::compressed(std::vector<float> values) {
  if (values.empty()) {
    throw std::invalid_argument("compressed descriptor must not be empty");
  }
  check_finite(values);
  return Descriptor{DescriptorStage::kCompressed, std::move(values), {}};
}

Descriptor Descriptor::quantized(std::vector<std::uint8_t> codes) {
  if (codes.empty()) {
    throw std::invalid_argument("quantized descriptor must not be empty");
  }
  return Descriptor{DescriptorStage::kQuantized, {}, std::move(codes)};
}

void MinutiaeTemplate::validate() const {
  validate_pairing(minutiae, descriptors, "minutiae template");
  for (const auto& m : minutiae) {
    if (m.kind != MinutiaKind::kReal) {
      throw std::invalid_argument("minutiae template holds a virtual minutia");
    }
  }
  if (!descriptors.empty() && descriptors.front().stage == DescriptorStage::kQuantized) {
    throw std::invalid_argument("minutiae template descriptors must not be quantized");
  }
}

void TextureTemplate::validate() const {
  validate_pairing(minutiae, descriptors, "texture template");
  for (const auto& m : minutiae) {
    if (m.kind != MinutiaKind::kVirtual) {
      throw std::invalid_argument("texture template holds a real minutia");
    }
  }
}

RidgeFields RidgeFields::allocate(int image_width, int image_height, int block_size) {
  RidgeFields f;
  f.block_size = block_size;
  f.image_width = image_width;
  f.image_height = image_height;
  f.rows = (image_height + block_size - 1) / block_size;
  f.cols = (image_width + block_size - 1) / block_size;
  const auto n = static_cast<std::size_t>(f.rows) * static_cast<std::size_t>(f.cols);
  f.orientation.assign(n, 0.0);
  f.spacing.assign(n, 0.0);
  f.quality.assign(n, 0.0);
  f.roi.assign(n, 0);
  return f;
}

bool RidgeFields::roi_at_pixel(int x, int y) const noexcept {
  if (x < 0 || y < 0 || x >= image_width || y >= image_height || empty()) {
    return false;
  }
  return roi_at(y / block_size, x / block_size);
}

std::size_t RidgeFields::roi_count() const noexcept {
  return static_cast<std::size_t>(std::count(roi.begin(), roi.end(), std::uint8_t{1}));
}

bool candidate_precedes(const CandidateEntry& a, const CandidateEntry& b) noexcept {
  if (a.score != b.score) {
    return a.score > b.score;
  }
  return a.reference_id < b.reference_id;
}

CandidateList rank_candidates(std::vector<CandidateEntry> entries, std::size_t k) {
  std::sort(entries.begin(), entries.end(), candidate_precedes);
  if (entries.size() > k) {
    entries.resize(k);
  }
  return CandidateList{std::move(entries)};
}

}  // namespace lfs
