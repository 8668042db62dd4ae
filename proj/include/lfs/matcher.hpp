#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfs/product_quantizer.hpp"
#include "lfs/types.hpp"

namespace lfs {

struct Correspondence {
  std::size_t latent_index = 0;
  std::size_t reference_index = 0;
  double similarity = 0.0;

  bool operator==(const Correspondence&) const = default;
};

struct MatchResult {
  double score = 0.0;
  std::vector<Correspondence> surviving;
  /// Candidates handed to graph matching (after top-N selection).
  std::vector<Correspondence> selected;
};

enum class SelectionMode : std::uint8_t { kMinutiae, kTexture };
enum class GraphStage : std::uint8_t { kSimplified, kFull };

struct MatcherParams {
  double tau_d = 15.0;
  double tau_theta = kPi / 6.0;
  std::size_t k_s = 10;
  double rho = 0.1;
  std::size_t n_minutiae = 120;
  std::size_t n_texture = 200;
  std::size_t texture_per_row = 2;
  int power_iterations = 100;
  double normalization_epsilon = 1e-6;
};

using SimilarityMatrix = Eigen::MatrixXd;

/// S[i][j] = cosine(d_i^l, d_j^r) floored at 0. Both templates must carry
/// compressed (or raw) float descriptors.
SimilarityMatrix similarity_matrix(const MinutiaeTemplate& latent, const MinutiaeTemplate& reference);

/// S'[i][j] = S[i][j] / (rowsum_i + colsum_j - S[i][j] + eps).
SimilarityMatrix normalize_similarity(const SimilarityMatrix& s, double eps = 1e-6);

/// Minutiae mode: global top-n of `ranked`. Texture mode: per latent row the
/// top `per_row` columns of `raw`, then global top-n of `ranked` among them.
/// Zero entries are never selected; ties go to the smaller (i, j).
std::vector<Correspondence> select_top_correspondences(const SimilarityMatrix& ranked, std::size_t n,
                                                       SelectionMode mode, const SimilarityMatrix& raw,
                                                       std::size_t per_row = 2);

/// Pairwise geometric compatibility in [0, 1]; 0 when the correspondences
/// share a latent or a reference minutia.
double compatibility(const Correspondence& a, const Correspondence& b, std::span<const Minutia> latent,
                     std::span<const Minutia> reference, const MatcherParams& params = {});

/// Simplified stage: keep the top half by summed compatibility with the K_s
/// nearest candidates. Full stage: principal eigenvector of the compatibility
/// matrix, greedy one-to-one extraction above rho * max. Score = sum of the
/// survivors' similarity times their mean pairwise compatibility (1 for a
/// single survivor).
MatchResult second_order_match(std::span<const Correspondence> candidates, std::span<const Minutia> latent,
                               std::span<const Minutia> reference, GraphStage stage, const MatcherParams& params = {});

/// Selection, simplified then full graph matching.
MatchResult match_candidates(std::vector<Correspondence> selected, std::span<const Minutia> latent,
                             std::span<const Minutia> reference, const MatcherParams& params);

MatchResult compare_minutiae_templates(const MinutiaeTemplate& latent, const MinutiaeTemplate& reference,
                                       const MatcherParams& params = {});

/// Direct path: every ADC distance computed from the codebook per pair.
MatchResult compare_texture_templates(const TextureTemplate& latent, const TextureTemplate& reference,
                                      const PqCodebook& codebook, double d0, const MatcherParams& params = {});

/// Descriptor rows unit-normalized once, for repeated comparisons.
struct PackedMinutiae {
  std::vector<Minutia> minutiae;
  Eigen::MatrixXd unit;  // n x L

  static PackedMinutiae pack(const MinutiaeTemplate& tpl);
  std::size_t size() const noexcept { return minutiae.size(); }
};

MatchResult compare_packed_minutiae(const PackedMinutiae& latent, const PackedMinutiae& reference,
                                    const MatcherParams& params = {});

/// Reference texture template with codes stored contiguously (n x m).
struct PackedTextureReference {
  std::vector<Minutia> minutiae;
  std::vector<std::uint8_t> codes;
  std::size_t subquantizers = 0;

  static PackedTextureReference pack(const TextureTemplate& tpl);
  std::size_t size() const noexcept { return minutiae.size(); }
};

/// Latent texture template with one ADC table per virtual minutia.
struct PreparedTextureProbe {
  std::vector<Minutia> minutiae;
  std::vector<AdcTable> tables;

  static PreparedTextureProbe prepare(const TextureTemplate& tpl, const PqCodebook& codebook);
  std::size_t size() const noexcept { return minutiae.size(); }
};

/// Table path with streaming per-row top-2 selection; equals
/// compare_texture_templates bit for bit.
MatchResult compare_texture_prepared(const PreparedTextureProbe& latent, const PackedTextureReference& reference,
                                     double d0, const MatcherParams& params = {});

struct FusionWeights {
  double minutiae1 = 1.0;
  double minutiae2 = 1.0;
  double minutiae3 = 1.0;
  double texture = 0.3;
};

double fuse_scores(double s1, double s2, double s3, double st, const FusionWeights& weights = {});

/// Text dump of selected and surviving correspondences, one per line.
std::string format_match_debug(const MatchResult& result, std::span<const Minutia> latent,
                               std::span<const Minutia> reference);

}  // namespace lfs
