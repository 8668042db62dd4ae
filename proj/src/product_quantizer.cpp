#include "lfs/product_quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "lfs/template_io.hpp"

namespace lfs {
namespace {

float squared_distance(const float* a, const float* b, std::size_t d) noexcept {
  float s = 0.0f;
  for (std::size_t i = 0; i < d; ++i) {
    const float t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

std::size_t nearest(const float* x, const std::vector<float>& centroids, std::size_t k, std::size_t d,
                    float* best_distance) noexcept {
  std::size_t best = 0;
  float best_d = std::numeric_limits<float>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const float dist = squared_distance(x, centroids.data() + c * d, d);
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  if (best_distance != nullptr) {
    *best_distance = best_d;
  }
  return best;
}

}  // namespace

PqCodebook::PqCodebook(std::size_t subquantizers, std::size_t centroids, std::size_t sub_dim, std::vector<float> data)
    : m_(subquantizers), k_(centroids), d_(sub_dim), data_(std::move(data)) {
  if (m_ == 0 || k_ == 0 || d_ == 0 || k_ > 256) {
    throw std::invalid_argument("codebook needs m > 0, 0 < k <= 256 and sub_dim > 0");
  }
  if (data_.size() != m_ * k_ * d_) {
    throw std::invalid_argument("codebook data has the wrong size");
  }
  for (float v : data_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("codebook centroids must be finite");
    }
  }
}

std::vector<float> kmeans(std::span<const float> rows, std::size_t dim, std::size_t k, int max_iterations,
                          std::uint64_t seed, std::vector<double>* distortion) {
  if (dim == 0 || rows.size() % dim != 0) {
    throw std::invalid_argument("k-means rows do not divide into the dimension");
  }
  const std::size_t n = rows.size() / dim;
  if (n < k || k == 0) {
    throw std::invalid_argument("k-means needs at least k points");
  }
  std::vector<float> centroids(k * dim);
  std::mt19937_64 rng(seed);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::copy_n(rows.data() + first * dim, dim, centroids.data());
  std::vector<float> min_d(n);
  for (std::size_t p = 0; p < n; ++p) {
    min_d[p] = squared_distance(rows.data() + p * dim, centroids.data(), dim);
  }
  for (std::size_t c = 1; c < k; ++c) {
    std::size_t far = 0;
    for (std::size_t p = 1; p < n; ++p) {
      if (min_d[p] > min_d[far]) {
        far = p;
      }
    }
    std::copy_n(rows.data() + far * dim, dim, centroids.data() + c * dim);
    for (std::size_t p = 0; p < n; ++p) {
      min_d[p] = std::min(min_d[p], squared_distance(rows.data() + p * dim, centroids.data() + c * dim, dim));
    }
  }

  std::vector<std::size_t> assign(n, k);
  std::vector<float> point_d(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const auto c = nearest(rows.data() + p * dim, centroids, k, dim, &point_d[p]);
      total += point_d[p];
      if (c != assign[p]) {
        assign[p] = c;
        changed = true;
      }
    }
    if (distortion != nullptr) {
      distortion->push_back(total);
    }
    if (!changed) {
      break;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      ++counts[assign[p]];
      for (std::size_t j = 0; j < dim; ++j) {
        sums[assign[p] * dim + j] += rows[p * dim + j];
      }
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) {
          centroids[c * dim + j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
        }
        continue;
      }
      // empty cluster: reseed at the worst-served point
      std::size_t far = n;
      for (std::size_t p = 0; p < n; ++p) {
        if (!taken[p] && (far == n || point_d[p] > point_d[far])) {
          far = p;
        }
      }
      if (far < n) {
        taken[far] = true;
        std::copy_n(rows.data() + far * dim, dim, centroids.data() + c * dim);
      }
    }
  }
  return centroids;
}

PqCodebook train_pq(std::span<const std::vector<float>> corpus, const PqOptions& options, PqTrainingReport* report) {
  if (corpus.empty()) {
    throw std::invalid_argument("product quantizer corpus is empty");
  }
  const std::size_t dim = corpus.front().size();
  const std::size_t m = options.subquantizers;
  if (m == 0 || dim % m != 0) {
    throw std::invalid_argument("subquantizer count must divide the descriptor length");
  }
  if (options.centroids == 0 || options.centroids > 256) {
    throw std::invalid_argument("centroid count must be in 1..256");
  }
  if (corpus.size() < options.centroids) {
    throw std::invalid_argument("product quantizer corpus needs at least one point per centroid");
  }
  for (const auto& row : corpus) {
    if (row.size() != dim) {
      throw std::invalid_argument("product quantizer corpus rows differ in length");
    }
  }
  const std::size_t d = dim / m;
  const std::size_t k = options.centroids;
  std::vector<float> data(m * k * d);
  if (report != nullptr) {
    report->distortion.assign(m, {});
  }
  std::vector<float> slice(corpus.size() * d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < corpus.size(); ++p) {
      std::copy_n(corpus[p].data() + i * d, d, slice.data() + p * d);
    }
    const auto cents = kmeans(slice, d, k, options.max_iterations, options.seed + i,
                              report != nullptr ? &report->distortion[i] : nullptr);
    std::copy(cents.begin(), cents.end(), data.begin() + static_cast<std::ptrdiff_t>(i * k * d));
  }
  return PqCodebook(m, k, d, std::move(data));
}

std::vector<std::uint8_t> quantize_values(const PqCodebook& codebook, std::span<const float> values) {
  if (values.size() != codebook.dimension()) {
    throw std::invalid_argument("descriptor length does not match the codebook");
  }
  std::vector<std::uint8_t> codes(codebook.subquantizers());
  const std::size_t d = codebook.sub_dim();
  for (std::size_t i = 0; i < codebook.subquantizers(); ++i) {
    std::size_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < codebook.centroids(); ++c) {
      const float dist = squared_distance(values.data() + i * d, codebook.centroid(i, c).data(), d);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    codes[i] = static_cast<std::uint8_t>(best);
  }
  return codes;
}

Descriptor quantize_descriptor(const PqCodebook& codebook, const Descriptor& compressed) {
  if (compressed.stage != DescriptorStage::kCompressed) {
    throw std::invalid_argument("quantize_descriptor expects a compressed descriptor");
  }
  return Descriptor::quantized(quantize_values(codebook, compressed.values));
}

std::vector<float> reconstruct(const PqCodebook& codebook, std::span<const std::uint8_t> codes) {
  if (codes.size() != codebook.subquantizers()) {
    throw std::invalid_argument("code count does not match the codebook");
  }
  std::vector<float> out;
  out.reserve(codebook.dimension());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= codebook.centroids()) {
      throw std::invalid_argument("code index out of range");
    }
    const auto c = codebook.centroid(i, codes[i]);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

float subvector_distance(std::span<const float> x, std::span<const float> centroid) noexcept {
  return std::sqrt(squared_distance(x.data(), centroid.data(), x.size()));
}

float adc_distance(std::span<const float> x, std::span<const std::uint8_t> codes, const PqCodebook& codebook) {
  if (x.size() != codebook.dimension() || codes.size() != codebook.subquantizers()) {
    throw std::invalid_argument("adc_distance: length mismatch with the codebook");
  }
  const std::size_t d = codebook.sub_dim();
  float total = 0.0f;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= codebook.centroids()) {
      throw std::invalid_argument("code index out of range");
    }
    total += subvector_distance(x.subspan(i * d, d), codebook.centroid(i, codes[i]));
  }
  return total;
}

float adc_distance(const Descriptor& x, const Descriptor& qy, const PqCodebook& codebook) {
  if (x.stage != DescriptorStage::kCompressed || qy.stage != DescriptorStage::kQuantized) {
    throw std::invalid_argument("adc_distance expects a compressed probe and a quantized reference");
  }
  return adc_distance(x.values, qy.codes, codebook);
}

AdcTable::AdcTable(const PqCodebook& codebook, std::span<const float> x)
    : m_(codebook.subquantizers()), k_(codebook.centroids()), table_(m_ * k_) {
  if (x.size() != codebook.dimension()) {
    throw std::invalid_argument("AdcTable: probe length does not match the codebook");
  }
  const std::size_t d = codebook.sub_dim();
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t c = 0; c < k_; ++c) {
      table_[i * k_ + c] = subvector_distance(x.subspan(i * d, d), codebook.centroid(i, c));
    }
  }
}

double calibrate_d0(std::span<const double> genuine_distances, double quantile) {
  if (genuine_distances.empty()) {
    throw std::invalid_argument("calibrate_d0 needs genuine distances");
  }
  std::vector<double> v(genuine_distances.begin(), genuine_distances.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(quantile, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<std::uint8_t> serialize_codebook(const PqCodebook& codebook) {
  ByteWriter w;
  w.tag("LFPQ");
  w.u16(1);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(codebook.subquantizers()));
  w.u32(static_cast<std::uint32_t>(codebook.centroids()));
  w.u32(static_cast<std::uint32_t>(codebook.sub_dim()));
  for (float v : codebook.data()) {
    w.f32(v);
  }
  return std::move(w).take();
}

PqCodebook deserialize_codebook(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_tag("LFPQ");
  if (r.u16() != 1) {
    throw FormatError("unsupported codebook version");
  }
  r.u16();
  const std::size_t m = r.u32();
  const std::size_t k = r.u32();
  const std::size_t d = r.u32();
  if (m == 0 || k == 0 || k > 256 || d == 0 || m * d > 65536) {
    throw FormatError("codebook header is implausible");
  }
  if (r.remaining() != m * k * d * 4) {
    throw FormatError("codebook payload has the wrong size");
  }
  std::vector<float> data(m * k * d);
  for (auto& v : data) {
    v = r.f32();
  }
  try {
    return PqCodebook(m, k, d, std::move(data));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

void write_codebook(const PqCodebook& codebook, const std::filesystem::path& path) {
  write_binary_file(serialize_codebook(codebook), path);
}

PqCodebook read_codebook(const std::filesystem::path& path) { return deserialize_codebook(read_binary_file(path)); }

}  // namespace lfs
