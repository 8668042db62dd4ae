#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "lfs/compressor.hpp"
#include "lfs/config.hpp"
#include "lfs/image.hpp"
#include "lfs/preprocessing.hpp"
#include "lfs/product_quantizer.hpp"
#include "lfs/ridge_analysis.hpp"
#include "lfs/template_io.hpp"
#include "lfs/types.hpp"

namespace lfs {

/// Trained state shared by enrolment and search.
struct EngineModels {
  CompressorModel compressor;
  PqCodebook codebook;
  double d0 = 0.0;  // calibrated texture distance threshold

  bool operator==(const EngineModels&) const = default;
};

/// Directory layout: compressor.bin, codebook.bin, model.cfg (`d0 = ...`).
void save_models(const EngineModels& models, const std::filesystem::path& dir);
EngineModels load_models(const std::filesystem::path& dir);

struct VirtualMinutiaGrid {
  int stride = 32;
  int border_margin = 16;
};

/// Lattice points (multiples of stride) whose square neighbourhood of radius
/// border_margin lies inside the image and inside the ROI. Orientation is the
/// containing block's flow angle, used directly as theta.
std::vector<Minutia> extract_virtual_minutiae(const RidgeFields& fields, const VirtualMinutiaGrid& grid = {});

struct LatentTemplates {
  std::array<MinutiaeTemplate, 3> minutiae;  // sets 1, 3 and 6
  TextureTemplate texture;
  RidgeFields fields;
  /// The five processed images, in set order 1..5 (kept for debugging).
  std::array<ProcessedImage, 5> processed;
  std::array<std::vector<Minutia>, 5> sets;
};

/// Enhancement, fields and ROI, five processed images, five detections, vote,
/// descriptors on the enhanced image, virtual minutiae for texture.
LatentTemplates build_latent_templates(const GrayImage& image, const EngineConfig& config,
                                       const CompressorModel& compressor,
                                       const RidgeDictionary& dict = default_dictionary());

struct ReferenceTemplates {
  ReferenceRecord record;
  RidgeFields fields;
};

/// Baseline detection on the unprocessed image with gradient/coherence ROI;
/// texture descriptors are quantized with `models.codebook`.
ReferenceTemplates build_reference_template(const GrayImage& image, const EngineConfig& config,
                                            const EngineModels& models,
                                            const RidgeDictionary& dict = default_dictionary());

/// Compressed descriptors of the given minutiae (raw extraction on `image`).
std::vector<Descriptor> describe(const GrayImage& image, std::span<const Minutia> minutiae,
                                 const CompressorModel& compressor);

struct ModelTrainingOptions {
  CompressorOptions compressor;
  PqOptions pq;
  /// Cap on the PQ training corpus (k-means cost is linear in it).
  std::size_t pq_corpus_limit = 20000;
  double d0_quantile = 0.95;
  std::uint64_t seed = 7;
};

/// Trains compressor, codebook and d0 from reference images. Raw descriptors
/// come from baseline and virtual minutiae; genuine pairs for d0 compare each
/// virtual minutia with the same point on a degraded copy of its image.
EngineModels train_models(std::span<const GrayImage> images, const EngineConfig& config,
                          const ModelTrainingOptions& options = {});

}  // namespace lfs
