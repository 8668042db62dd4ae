#include "lfs/cmc.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lfs {

std::vector<std::size_t> mate_ranks(const Eigen::MatrixXd& scores, std::span<const std::string> gallery_ids,
                                    std::span<const std::string> mate_ids) {
  if (static_cast<std::size_t>(scores.rows()) != mate_ids.size() ||
      static_cast<std::size_t>(scores.cols()) != gallery_ids.size()) {
    throw std::invalid_argument("cmc: score matrix shape does not match probe and gallery ids");
  }
  std::map<std::string, Eigen::Index> column;
  for (std::size_t j = 0; j < gallery_ids.size(); ++j) {
    if (!column.emplace(gallery_ids[j], static_cast<Eigen::Index>(j)).second) {
      throw std::invalid_argument("cmc: duplicate gallery id '" + gallery_ids[j] + "'");
    }
  }
  std::vector<std::size_t> ranks;
  ranks.reserve(mate_ids.size());
  for (std::size_t p = 0; p < mate_ids.size(); ++p) {
    const auto it = column.find(mate_ids[p]);
    if (it == column.end()) {
      throw std::invalid_argument("cmc: mate '" + mate_ids[p] + "' is not in the gallery");
    }
    const auto row = static_cast<Eigen::Index>(p);
    const double mate = scores(row, it->second);
    std::size_t rank = 1;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const double s = scores(row, j);
      if (s > mate || (s == mate && gallery_ids[static_cast<std::size_t>(j)] < mate_ids[p])) {
        ++rank;
      }
    }
    ranks.push_back(rank);
  }
  return ranks;
}

CmcCurve cmc_from_ranks(std::span<const std::size_t> ranks, std::size_t max_rank) {
  CmcCurve curve;
  curve.rates.assign(max_rank, 0.0);
  if (ranks.empty()) {
    return curve;
  }
  std::vector<std::size_t> hist(max_rank + 1, 0);
  for (auto r : ranks) {
    if (r >= 1 && r <= max_rank) {
      ++hist[r];
    }
  }
  std::size_t cum = 0;
  for (std::size_t k = 1; k <= max_rank; ++k) {
    cum += hist[k];
    curve.rates[k - 1] = static_cast<double>(cum) / static_cast<double>(ranks.size());
  }
  return curve;
}

CmcCurve evaluate_cmc(const Eigen::MatrixXd& scores, std::span<const std::string> gallery_ids,
                      std::span<const std::string> mate_ids, std::size_t max_rank) {
  const auto ranks = mate_ranks(scores, gallery_ids, mate_ids);
  return cmc_from_ranks(ranks, max_rank == 0 ? gallery_ids.size() : max_rank);
}

std::string format_cmc_csv(const CmcCurve& curve) {
  std::ostringstream out;
  out.precision(10);
  out << "rank,rate\n";
  for (std::size_t k = 1; k <= curve.rates.size(); ++k) {
    out << k << ',' << curve.rates[k - 1] << '\n';
  }
  return out.str();
}

void write_cmc_csv(const CmcCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << format_cmc_csv(curve);
}

}  // namespace lfs
