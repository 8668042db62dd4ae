#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lfs/types.hpp"

namespace lfs {

struct PqOptions {
  std::size_t subquantizers = kDefaultSubquantizers;
  std::size_t centroids = kCentroidsPerSubquantizer;
  int max_iterations = 50;
  std::uint64_t seed = 1;
};

/// m independent codebooks; codebook i quantizes dimensions
/// [i * sub_dim, (i + 1) * sub_dim).
class PqCodebook {
 public:
  PqCodebook() = default;
  PqCodebook(std::size_t subquantizers, std::size_t centroids, std::size_t sub_dim, std::vector<float> data);

  std::size_t subquantizers() const noexcept { return m_; }
  std::size_t centroids() const noexcept { return k_; }
  std::size_t sub_dim() const noexcept { return d_; }
  std::size_t dimension() const noexcept { return m_ * d_; }
  bool empty() const noexcept { return data_.empty(); }

  /// Centroid `c` of subquantizer `i`.
  std::span<const float> centroid(std::size_t i, std::size_t c) const noexcept {
    return {data_.data() + (i * k_ + c) * d_, d_};
  }
  const std::vector<float>& data() const noexcept { return data_; }

  bool operator==(const PqCodebook&) const = default;

 private:
  std::size_t m_ = 0;
  std::size_t k_ = 0;
  std::size_t d_ = 0;
  std::vector<float> data_;
};

struct PqTrainingReport {
  /// Per subquantizer: total squared distortion after each assignment step.
  std::vector<std::vector<double>> distortion;
};

/// Plain k-means for one slice: farthest-point initialization from a seeded
/// first pick, at most max_iterations Lloyd steps, empty clusters reseeded
/// from the point farthest from its centroid. Rows are `dim` floats each.
std::vector<float> kmeans(std::span<const float> rows, std::size_t dim, std::size_t k, int max_iterations,
                          std::uint64_t seed, std::vector<double>* distortion = nullptr);

/// Throws std::invalid_argument when m does not divide the dimension, the
/// corpus has fewer points than centroids, or rows differ in length.
PqCodebook train_pq(std::span<const std::vector<float>> corpus, const PqOptions& options = {},
                    PqTrainingReport* report = nullptr);

/// Nearest centroid per subvector (Euclidean); ties go to the lowest index.
Descriptor quantize_descriptor(const PqCodebook& codebook, const Descriptor& compressed);
std::vector<std::uint8_t> quantize_values(const PqCodebook& codebook, std::span<const float> values);

/// Concatenated centroids for a code vector.
std::vector<float> reconstruct(const PqCodebook& codebook, std::span<const std::uint8_t> codes);

/// Euclidean distance between a probe subvector and a centroid, in float.
/// Both the direct and the table path go through this function.
float subvector_distance(std::span<const float> x, std::span<const float> centroid) noexcept;

/// D(x, q(y)) = sum_i ||x_i - c^i_{q(y_i)}||, accumulated in float in subvector order.
float adc_distance(std::span<const float> x, std::span<const std::uint8_t> codes, const PqCodebook& codebook);
float adc_distance(const Descriptor& x, const Descriptor& qy, const PqCodebook& codebook);

/// Per-probe m x k table of sub-distances; lookup is m adds.
class AdcTable {
 public:
  AdcTable() = default;
  AdcTable(const PqCodebook& codebook, std::span<const float> x);

  float distance(std::span<const std::uint8_t> codes) const noexcept {
    float d = 0.0f;
    for (std::size_t i = 0; i < m_; ++i) {
      d += table_[i * k_ + codes[i]];
    }
    return d;
  }
  std::size_t subquantizers() const noexcept { return m_; }
  const float* row(std::size_t i) const noexcept { return table_.data() + i * k_; }

 private:
  std::size_t m_ = 0;
  std::size_t k_ = 0;
  std::vector<float> table_;
};

/// The q-quantile (default 0.95) of genuine-pair ADC distances.
double calibrate_d0(std::span<const double> genuine_distances, double quantile = 0.95);

std::vector<std::uint8_t> serialize_codebook(const PqCodebook& codebook);
PqCodebook deserialize_codebook(std::span<const std::uint8_t> bytes);
void write_codebook(const PqCodebook& codebook, const std::filesystem::path& path);
PqCodebook read_codebook(const std::filesystem::path& path);

}  // namespace lfs
