#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lfs/types.hpp"

namespace lfs {

inline constexpr std::size_t kMinCompressorCorpus = 10000;

struct CompressorOptions {
  std::size_t output_width = kCompressedDescriptorLength;
  int epochs = 20;
  std::size_t pairs_per_epoch = 20000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  /// Refuse corpora smaller than this.
  std::size_t min_corpus = kMinCompressorCorpus;
};

/// Four affine stages (input -> input -> 160 -> 128 -> output) with tanh
/// between them; outputs are unit-normalized.
class CompressorModel {
 public:
  CompressorModel() = default;
  /// Xavier-uniform initialization from `seed`.
  CompressorModel(std::size_t input_width, std::size_t output_width, std::uint64_t seed);

  std::size_t input_width() const noexcept;
  std::size_t output_width() const noexcept;
  bool empty() const noexcept { return weights_.empty(); }

  /// Unit-norm output for one input vector.
  std::vector<float> forward(std::span<const float> input) const;

  const std::vector<Eigen::MatrixXf>& weights() const noexcept { return weights_; }
  const std::vector<Eigen::VectorXf>& biases() const noexcept { return biases_; }
  std::vector<Eigen::MatrixXf>& weights() noexcept { return weights_; }
  std::vector<Eigen::VectorXf>& biases() noexcept { return biases_; }

  bool operator==(const CompressorModel& other) const;

 private:
  std::vector<Eigen::MatrixXf> weights_;
  std::vector<Eigen::VectorXf> biases_;
};

struct CompressorTrainingReport {
  std::vector<double> epoch_losses;
};

/// Trains on pairs drawn from `corpus`: half uniformly random, half near
/// neighbours (best cosine among 32 random candidates). Loss is the squared
/// difference between input-pair and output-pair cosine. Deterministic given
/// options.seed. Throws std::invalid_argument for a too-small corpus or rows of
/// unequal width.
CompressorModel train_compressor(std::span<const std::vector<float>> corpus, const CompressorOptions& options = {},
                                 CompressorTrainingReport* report = nullptr);

/// Raw descriptor (192 values) to compressed descriptor (unit norm).
Descriptor compress_descriptor(const CompressorModel& model, const Descriptor& raw);

std::vector<std::uint8_t> serialize_compressor(const CompressorModel& model);
CompressorModel deserialize_compressor(std::span<const std::uint8_t> bytes);
void write_compressor(const CompressorModel& model, const std::filesystem::path& path);
CompressorModel read_compressor(const std::filesystem::path& path);

}  // namespace lfs
