#pragma once

#include <filesystem>
#include <string>

#include "lfs/matcher.hpp"
#include "lfs/minutiae_map.hpp"

namespace lfs {

/// Every tunable threshold of the engine. Text form is one `key = value`
/// per line; `#` starts a comment; unknown keys are rejected.
struct EngineConfig {
  EncoderParams encoder;              // sigma_s, sigma_o
  double m_t = kDefaultMapThreshold;  // map decoding threshold
  double s_r = 0.35;                  // ROI quality threshold
  double alpha = 300.0;               // patch-similarity regularizer
  VoteParams vote;                    // vote_distance, vote_angle, vote_min
  MatcherParams matcher;              // n_minutiae, n_texture, tau_d, tau_theta, k_s, rho
  FusionWeights weights;              // lambda1..lambda4
  double d0 = 0.0;                    // texture distance threshold; 0 = use the model's value
  int stride = 32;                    // virtual minutiae lattice stride
  int border_margin = 16;
  std::size_t topk = 20;
  std::size_t workers = 1;
};

EngineConfig parse_config(const std::string& text);
EngineConfig load_config(const std::filesystem::path& path);
std::string format_config(const EngineConfig& config);
void save_config(const EngineConfig& config, const std::filesystem::path& path);

}  // namespace lfs
