#include "lfs/ridge_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lfs/template_io.hpp"

namespace lfs {
namespace {

constexpr int kDictionaryTotal = 90;

void standardize(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (auto& x : v) {
    x -= mean;
    ss += x * x;
  }
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  if (sd > 0.0) {
    for (auto& x : v) {
      x /= sd;
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

DictionaryElement synthesize(double orientation, double spacing) {
  DictionaryElement e;
  e.orientation = orientation;
  e.spacing = spacing;
  e.pattern.resize(kDictionaryPatchPixels);
  e.quadrature.resize(kDictionaryPatchPixels);
  // phase advances along the ridge normal
  const double nx = -std::sin(orientation);
  const double ny = std::cos(orientation);
  const double centre = (kDictionaryPatchSize - 1) / 2.0;
  for (int y = 0; y < kDictionaryPatchSize; ++y) {
    for (int x = 0; x < kDictionaryPatchSize; ++x) {
      const double t = (x - centre) * nx + (y - centre) * ny;
      const double phase = kTwoPi * t / spacing;
      e.pattern[y * kDictionaryPatchSize + x] = std::cos(phase);
      e.quadrature[y * kDictionaryPatchSize + x] = std::sin(phase);
    }
  }
  standardize(e.pattern);
  standardize(e.quadrature);
  const double n2 = dot(e.pattern, e.pattern);
  const double proj = dot(e.quadrature, e.pattern) / n2;
  for (std::size_t i = 0; i < kDictionaryPatchPixels; ++i) {
    e.quadrature[i] -= proj * e.pattern[i];
  }
  standardize(e.quadrature);
  return e;
}

double standardized_cosine(std::span<const double> a, std::span<const double> b) {
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  standardize(sa);
  standardize(sb);
  const double na = std::sqrt(dot(sa, sa));
  const double nb = std::sqrt(dot(sb, sb));
  if (na <= 0.0 || nb <= 0.0) {
    return 0.0;
  }
  return dot(sa, sb) / (na * nb);
}

using Mask = std::vector<std::uint8_t>;

Mask erode(const Mask& m, int rows, int cols) {
  Mask out(m.size(), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool all = true;
      for (int dr = -1; dr <= 1 && all; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) {
            continue;
          }
          if (!m[rr * cols + cc]) {
            all = false;
            break;
          }
        }
      }
      out[r * cols + c] = all ? 1 : 0;
    }
  }
  return out;
}

Mask dilate(const Mask& m, int rows, int cols) {
  Mask out(m.size(), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool any = false;
      for (int dr = -1; dr <= 1 && !any; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) {
            continue;
          }
          if (m[rr * cols + cc]) {
            any = true;
            break;
          }
        }
      }
      out[r * cols + c] = any ? 1 : 0;
    }
  }
  return out;
}

Mask largest_component(const Mask& m, int rows, int cols) {
  std::vector<int> label(m.size(), -1);
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::vector<int> stack;
  for (int start = 0; start < rows * cols; ++start) {
    if (!m[start] || label[start] >= 0) {
      continue;
    }
    const int id = next++;
    std::size_t size = 0;
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int r = p / cols;
      const int c = p % cols;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) {
            continue;
          }
          const int q = rr * cols + cc;
          if (m[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = id;
    }
  }
  Mask out(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    out[i] = (best_label >= 0 && label[i] == best_label) ? 1 : 0;
  }
  return out;
}

}  // namespace

std::size_t RidgeDictionary::find(double orientation, double spacing) const noexcept {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (std::abs(elements_[i].orientation - orientation) < 1e-9 && std::abs(elements_[i].spacing - spacing) < 1e-9) {
      return i;
    }
  }
  return elements_.size();
}

RidgeDictionary build_dictionary(int orientation_count, std::span<const double> spacings) {
  if (orientation_count <= 0 || spacings.empty() ||
      orientation_count * static_cast<long>(spacings.size()) != kDictionaryTotal) {
    throw std::invalid_argument("dictionary needs orientations x spacings == 90");
  }
  for (std::size_t i = 0; i < spacings.size(); ++i) {
    if (!(spacings[i] > 0.0)) {
      throw std::invalid_argument("ridge spacing must be positive");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (spacings[i] == spacings[j]) {
        throw std::invalid_argument("duplicate ridge spacing");
      }
    }
  }
  std::vector<DictionaryElement> elements;
  elements.reserve(kDictionaryTotal);
  for (int k = 0; k < orientation_count; ++k) {
    const double orientation = k * kPi / orientation_count;
    for (double spacing : spacings) {
      elements.push_back(synthesize(orientation, spacing));
    }
  }
  return RidgeDictionary(std::move(elements));
}

const RidgeDictionary& default_dictionary() {
  static const RidgeDictionary dict = [] {
    const std::vector<double> spacings{5, 6, 7, 8, 9, 10, 11, 12, 13};
    return build_dictionary(10, spacings);
  }();
  return dict;
}

std::vector<double> dictionary_responses(std::span<const double> patch, const RidgeDictionary& dict, double alpha) {
  if (patch.size() != kDictionaryPatchPixels) {
    throw std::invalid_argument("patch must be 32x32");
  }
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument("alpha must be non-negative");
  }
  const double mean = std::accumulate(patch.begin(), patch.end(), 0.0) / static_cast<double>(patch.size());
  std::vector<double> centred(patch.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < patch.size(); ++i) {
    centred[i] = patch[i] - mean;
    ss += centred[i] * centred[i];
  }
  const double denom = std::sqrt(ss) + alpha;
  std::vector<double> out(dict.size(), 0.0);
  if (denom <= 0.0) {
    return out;
  }
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const auto& e = dict[i];
    const double c = dot(centred, e.pattern);
    const double s = dot(centred, e.quadrature);
    out[i] = std::sqrt(c * c + s * s) / denom;
  }
  return out;
}

PatchSimilarity patch_similarity(std::span<const double> patch, const RidgeDictionary& dict, double alpha) {
  const auto responses = dictionary_responses(patch, dict, alpha);
  PatchSimilarity result;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (responses[i] > result.s_m) {
      result.s_m = responses[i];
      result.best_index = i;
    }
  }
  result.quality = result.s_m;
  return result;
}

PatchSimilarity patch_similarity(std::span<const double> enhanced_patch, std::span<const double> raw_patch,
                                 const RidgeDictionary& dict, double alpha) {
  if (raw_patch.size() != enhanced_patch.size()) {
    throw std::invalid_argument("raw and enhanced patches differ in size");
  }
  auto result = patch_similarity(enhanced_patch, dict, alpha);
  result.quality = result.s_m + standardized_cosine(raw_patch, enhanced_patch);
  return result;
}

std::vector<double> extract_patch(const GrayImage& image, int x0, int y0, int size) {
  std::vector<double> patch(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      patch[y * size + x] = image.clamped(x0 + x, y0 + y) / 255.0;
    }
  }
  return patch;
}

RidgeFields estimate_ridge_fields(const GrayImage& enhanced, const GrayImage& raw, const RidgeDictionary& dict,
                                  double alpha) {
  if (enhanced.width != raw.width || enhanced.height != raw.height) {
    throw std::invalid_argument("enhanced and raw images differ in size");
  }
  if (enhanced.width < kDictionaryPatchSize || enhanced.height < kDictionaryPatchSize) {
    RidgeFields f;
    f.image_width = enhanced.width;
    f.image_height = enhanced.height;
    return f;
  }
  auto fields = RidgeFields::allocate(enhanced.width, enhanced.height);
  const int half = (kDictionaryPatchSize - fields.block_size) / 2;
  for (int r = 0; r < fields.rows; ++r) {
    for (int c = 0; c < fields.cols; ++c) {
      const int x0 = c * fields.block_size - half;
      const int y0 = r * fields.block_size - half;
      const auto p_enh = extract_patch(enhanced, x0, y0);
      const auto p_raw = extract_patch(raw, x0, y0);
      const auto sim = patch_similarity(p_enh, p_raw, dict, alpha);
      const auto i = fields.index(r, c);
      fields.orientation[i] = dict[sim.best_index].orientation;
      fields.spacing[i] = dict[sim.best_index].spacing;
      fields.quality[i] = sim.quality;
    }
  }
  return fields;
}

RidgeFields estimate_reference_fields(const GrayImage& image, const RidgeDictionary& dict, double s_r) {
  if (image.width < kDictionaryPatchSize || image.height < kDictionaryPatchSize) {
    RidgeFields f;
    f.image_width = image.width;
    f.image_height = image.height;
    return f;
  }
  auto fields = RidgeFields::allocate(image.width, image.height);
  const int w = image.width;
  const int h = image.height;
  std::vector<double> gx(static_cast<std::size_t>(w) * h);
  std::vector<double> gy(gx.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gx[y * w + x] = 0.5 * (image.clamped(x + 1, y) - image.clamped(x - 1, y));
      gy[y * w + x] = 0.5 * (image.clamped(x, y + 1) - image.clamped(x, y - 1));
    }
  }
  const int half = (kDictionaryPatchSize - fields.block_size) / 2;
  for (int r = 0; r < fields.rows; ++r) {
    for (int c = 0; c < fields.cols; ++c) {
      const int x0 = c * fields.block_size - half;
      const int y0 = r * fields.block_size - half;
      double gxx = 0.0, gyy = 0.0, gxy = 0.0, mag = 0.0;
      int count = 0;
      for (int y = std::max(0, y0); y < std::min(h, y0 + kDictionaryPatchSize); ++y) {
        for (int x = std::max(0, x0); x < std::min(w, x0 + kDictionaryPatchSize); ++x) {
          const double a = gx[y * w + x];
          const double b = gy[y * w + x];
          gxx += a * a;
          gyy += b * b;
          gxy += a * b;
          mag += std::sqrt(a * a + b * b);
          ++count;
        }
      }
      const double energy = gxx + gyy;
      const double coherence = energy > 0.0 ? std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy) / energy : 0.0;
      const double mean_mag = count > 0 ? mag / count : 0.0;
      const auto sim = patch_similarity(extract_patch(image, x0, y0), dict);
      const auto i = fields.index(r, c);
      fields.orientation[i] = dict[sim.best_index].orientation;
      fields.spacing[i] = dict[sim.best_index].spacing;
      fields.quality[i] = coherence * std::min(1.0, mean_mag / 20.0);
    }
  }
  return segment_roi(std::move(fields), s_r);
}

RidgeFields segment_roi(RidgeFields fields, double s_r, bool keep_largest) {
  if (fields.empty()) {
    return fields;
  }
  Mask m(fields.quality.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = fields.quality[i] > s_r ? 1 : 0;
  }
  const int rows = fields.rows;
  const int cols = fields.cols;
  m = dilate(erode(m, rows, cols), rows, cols);
  m = erode(dilate(m, rows, cols), rows, cols);
  if (keep_largest) {
    m = largest_component(m, rows, cols);
  }
  fields.roi = std::move(m);
  return fields;
}

void write_fields_binary(const RidgeFields& fields, const std::filesystem::path& path) {
  ByteWriter w;
  w.tag("LFRF");
  w.u32(static_cast<std::uint32_t>(fields.block_size));
  w.u32(static_cast<std::uint32_t>(fields.rows));
  w.u32(static_cast<std::uint32_t>(fields.cols));
  for (double v : fields.orientation) w.f32(static_cast<float>(v));
  for (double v : fields.spacing) w.f32(static_cast<float>(v));
  for (double v : fields.quality) w.f32(static_cast<float>(v));
  for (auto v : fields.roi) w.f32(v ? 1.0f : 0.0f);
  write_binary_file(std::move(w).take(), path);
}

RidgeFields read_fields_binary(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  ByteReader r(bytes);
  r.expect_tag("LFRF");
  RidgeFields f;
  f.block_size = static_cast<int>(r.u32());
  f.rows = static_cast<int>(r.u32());
  f.cols = static_cast<int>(r.u32());
  f.image_width = f.cols * f.block_size;
  f.image_height = f.rows * f.block_size;
  const auto n = static_cast<std::size_t>(f.rows) * f.cols;
  if (r.remaining() != n * 16) {
    throw FormatError("ridge field planes have the wrong size");
  }
  f.orientation.resize(n);
  f.spacing.resize(n);
  f.quality.resize(n);
  f.roi.resize(n);
  for (auto& v : f.orientation) v = r.f32();
  for (auto& v : f.spacing) v = r.f32();
  for (auto& v : f.quality) v = r.f32();
  for (auto& v : f.roi) v = r.f32() > 0.5f ? 1 : 0;
  return f;
}

RgbImage render_fields_overlay(const GrayImage& image, const RidgeFields& fields) {
  RgbImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(image.at(x, y), 0.0f, 255.0f)));
      out.set(x, y, {g, g, g});
    }
  }
  if (fields.empty()) {
    return out;
  }
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (!fields.roi_at_pixel(x, y)) {
        continue;
      }
      const bool boundary = !fields.roi_at_pixel(x - 1, y) || !fields.roi_at_pixel(x + 1, y) ||
                            !fields.roi_at_pixel(x, y - 1) || !fields.roi_at_pixel(x, y + 1);
      if (boundary) {
        out.set(x, y, {255, 0, 0});
      }
    }
  }
  const int bs = fields.block_size;
  for (int r = 0; r < fields.rows; ++r) {
    for (int c = 0; c < fields.cols; ++c) {
      if (!fields.roi_at(r, c)) {
        continue;
      }
      const double o = fields.orientation[fields.index(r, c)];
      const double cx = c * bs + bs / 2.0;
      const double cy = r * bs + bs / 2.0;
      for (int t = -bs / 2 + 2; t <= bs / 2 - 2; ++t) {
        out.set(static_cast<int>(std::lround(cx + t * std::cos(o))), static_cast<int>(std::lround(cy + t * std::sin(o))),
                {0, 220, 0});
      }
    }
  }
  return out;
}

}  // namespace lfs
