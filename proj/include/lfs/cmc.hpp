#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lfs {

/// rates[k - 1] is the fraction of probes whose mate ranks at k or better.
struct CmcCurve {
  std::vector<double> rates;

  double rate(std::size_t k) const { return rates.at(k - 1); }
  std::size_t max_rank() const noexcept { return rates.size(); }
};

/// Rank of each probe's mate in its score row: 1 + #(scores > mate) +
/// #(scores == mate with a smaller gallery id). Throws std::invalid_argument
/// when a mate id is not in `gallery_ids` or the shapes disagree.
std::vector<std::size_t> mate_ranks(const Eigen::MatrixXd& scores, std::span<const std::string> gallery_ids,
                                    std::span<const std::string> mate_ids);

/// Curve over ranks 1..max_rank (0 = gallery size).
CmcCurve evaluate_cmc(const Eigen::MatrixXd& scores, std::span<const std::string> gallery_ids,
                      std::span<const std::string> mate_ids, std::size_t max_rank = 0);

CmcCurve cmc_from_ranks(std::span<const std::size_t> ranks, std::size_t max_rank);

/// "rank,rate" header then one line per rank.
std::string format_cmc_csv(const CmcCurve& curve);
void write_cmc_csv(const CmcCurve& curve, const std::filesystem::path& path);

}  // namespace lfs
