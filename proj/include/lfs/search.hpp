#pragma once

#include <array>
#include <vector>

#include "lfs/config.hpp"
#include "lfs/gallery.hpp"
#include "lfs/matcher.hpp"
#include "lfs/types.hpp"

namespace lfs {

/// Latent templates packed once per search: unit-norm minutiae descriptors
/// and one ADC table per virtual minutia.
struct PreparedProbe {
  std::array<PackedMinutiae, 3> minutiae;
  PreparedTextureProbe texture;

  static PreparedProbe prepare(const std::array<MinutiaeTemplate, 3>& minutiae, const TextureTemplate& texture,
                               const PqCodebook& codebook);
};

struct SearchOptions {
  std::size_t topk = 20;
  std::size_t workers = 1;
  MatcherParams matcher;
  FusionWeights weights;
  double d0 = 1.0;
};

/// Search settings from an engine config; config.d0 == 0 selects `model_d0`.
SearchOptions search_options(const EngineConfig& config, double model_d0);

/// Three minutiae comparisons and one texture comparison, fused.
CandidateEntry score_reference(const PreparedProbe& probe, const GalleryEntry& reference,
                               const SearchOptions& options);

/// Every reference scored, in gallery order.
std::vector<CandidateEntry> score_all(const PreparedProbe& probe, const GalleryIndex& index,
                                      const SearchOptions& options);

/// Top-K candidates. The gallery is split into contiguous shards, one per
/// worker; each shard keeps its own top-K and the shards are merged with the
/// same total order, so the result does not depend on the worker count.
CandidateList search_gallery(const PreparedProbe& probe, const GalleryIndex& index, const SearchOptions& options);

/// Match details for one candidate (surviving correspondences per template).
struct CandidateDetail {
  CandidateEntry entry;
  std::array<MatchResult, 3> minutiae;
  MatchResult texture;
};

CandidateDetail explain_candidate(const PreparedProbe& probe, const GalleryEntry& reference,
                                  const SearchOptions& options);

}  // namespace lfs
