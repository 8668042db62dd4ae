#include "lfs/matcher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lfs/angles.hpp"

namespace lfs {
namespace {

bool ranks_before(const Correspondence& a, const Correspondence& b) noexcept {
  if (a.similarity != b.similarity) {
    return a.similarity > b.similarity;
  }
  if (a.latent_index != b.latent_index) {
    return a.latent_index < b.latent_index;
  }
  return a.reference_index < b.reference_index;
}

void keep_top(std::vector<Correspondence>& v, std::size_t n) {
  if (v.size() > n) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), v.end(), ranks_before);
    v.resize(n);
  } else {
    std::sort(v.begin(), v.end(), ranks_before);
  }
}

MatchResult single_survivor(const Correspondence& c, std::vector<Correspondence> selected) {
  MatchResult r;
  r.selected = std::move(selected);
  if (c.similarity > 0.0) {
    r.surviving.push_back(c);
    r.score = c.similarity;
  }
  return r;
}

double survivor_score(std::span<const Correspondence> survivors, std::span<const Minutia> latent,
                      std::span<const Minutia> reference, const MatcherParams& params) {
  if (survivors.empty()) {
    return 0.0;
  }
  double sim = 0.0;
  for (const auto& c : survivors) {
    sim += c.similarity;
  }
  if (survivors.size() == 1) {
    return sim;
  }
  double compat = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < survivors.size(); ++a) {
    for (std::size_t b = a + 1; b < survivors.size(); ++b) {
      compat += compatibility(survivors[a], survivors[b], latent, reference, params);
      ++pairs;
    }
  }
  return sim * (compat / static_cast<double>(pairs));
}

void check_float_descriptors(const std::vector<Descriptor>& descriptors) {
  for (const auto& d : descriptors) {
    if (d.stage == DescriptorStage::kQuantized) {
      throw std::invalid_argument("similarity needs float descriptors");
    }
  }
}

}  // namespace

PackedMinutiae PackedMinutiae::pack(const MinutiaeTemplate& tpl) {
  if (tpl.minutiae.size() != tpl.descriptors.size()) {
    throw std::invalid_argument("template minutiae and descriptors differ in count");
  }
  check_float_descriptors(tpl.descriptors);
  PackedMinutiae p;
  p.minutiae = tpl.minutiae;
  const std::size_t n = tpl.size();
  const std::size_t len = n > 0 ? tpl.descriptors.front().values.size() : 0;
  p.unit.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(len));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = tpl.descriptors[i].values;
    if (v.size() != len) {
      throw std::invalid_argument("descriptor lengths differ within a template");
    }
    double ss = 0.0;
    for (float x : v) {
      ss += static_cast<double>(x) * x;
    }
    const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      p.unit(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[k] * inv;
    }
  }
  return p;
}

namespace {

SimilarityMatrix packed_similarity(const PackedMinutiae& l, const PackedMinutiae& r) {
  if (l.size() == 0 || r.size() == 0) {
    return SimilarityMatrix(static_cast<Eigen::Index>(l.size()), static_cast<Eigen::Index>(r.size()));
  }
  if (l.unit.cols() != r.unit.cols()) {
    throw std::invalid_argument("descriptor lengths differ between templates");
  }
  SimilarityMatrix s = l.unit * r.unit.transpose();
  return s.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

SimilarityMatrix similarity_matrix(const MinutiaeTemplate& latent, const MinutiaeTemplate& reference) {
  return packed_similarity(PackedMinutiae::pack(latent), PackedMinutiae::pack(reference));
}

SimilarityMatrix normalize_similarity(const SimilarityMatrix& s, double eps) {
  SimilarityMatrix out(s.rows(), s.cols());
  if (s.size() == 0) {
    return out;
  }
  const Eigen::VectorXd rows = s.rowwise().sum();
  const Eigen::RowVectorXd cols = s.colwise().sum();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      out(i, j) = s(i, j) / (rows[i] + cols[j] - s(i, j) + eps);
    }
  }
  return out;
}

std::vector<Correspondence> select_top_correspondences(const SimilarityMatrix& ranked, std::size_t n,
                                                       SelectionMode mode, const SimilarityMatrix& raw,
                                                       std::size_t per_row) {
  std::vector<Correspondence> pool;
  if (mode == SelectionMode::kMinutiae) {
    for (Eigen::Index i = 0; i < ranked.rows(); ++i) {
      for (Eigen::Index j = 0; j < ranked.cols(); ++j) {
        if (ranked(i, j) > 0.0) {
          pool.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), ranked(i, j)});
        }
      }
    }
  } else {
    if (raw.rows() != ranked.rows() || raw.cols() != ranked.cols()) {
      throw std::invalid_argument("raw and ranked similarity matrices differ in shape");
    }
    std::vector<Correspondence> row;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      row.clear();
      for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        if (raw(i, j) > 0.0) {
          row.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), raw(i, j)});
        }
      }
      keep_top(row, per_row);
      for (auto c : row) {
        c.similarity = ranked(i, static_cast<Eigen::Index>(c.reference_index));
        if (c.similarity > 0.0) {
          pool.push_back(c);
        }
      }
    }
  }
  keep_top(pool, n);
  return pool;
}

double compatibility(const Correspondence& a, const Correspondence& b, std::span<const Minutia> latent,
                     std::span<const Minutia> reference, const MatcherParams& params) {
  if (a.latent_index == b.latent_index || a.reference_index == b.reference_index) {
    return 0.0;
  }
  const auto& la = latent[a.latent_index];
  const auto& lb = latent[b.latent_index];
  const auto& ra = reference[a.reference_index];
  const auto& rb = reference[b.reference_index];
  const double ldx = lb.x - la.x;
  const double ldy = lb.y - la.y;
  const double rdx = rb.x - ra.x;
  const double rdy = rb.y - ra.y;
  const double dl = std::sqrt(ldx * ldx + ldy * ldy);
  const double dr = std::sqrt(rdx * rdx + rdy * rdy);
  const double length = std::abs(dl - dr) / params.tau_d;

  const double orient =
      angle_diff(wrap_two_pi(lb.theta - la.theta), wrap_two_pi(rb.theta - ra.theta)) / params.tau_theta;

  // edge direction seen from each endpoint, relative to that minutia
  const double le = std::atan2(ldy, ldx);
  const double re = std::atan2(rdy, rdx);
  const double phi_la = wrap_two_pi(le - la.theta);
  const double phi_lb = wrap_two_pi(le + kPi - lb.theta);
  const double phi_ra = wrap_two_pi(re - ra.theta);
  const double phi_rb = wrap_two_pi(re + kPi - rb.theta);
  const double edge = (angle_diff(phi_la, phi_ra) + angle_diff(phi_lb, phi_rb)) / (2.0 * params.tau_theta);
  return std::exp(-(length + orient + edge));
}

MatchResult second_order_match(std::span<const Correspondence> candidates, std::span<const Minutia> latent,
                               std::span<const Minutia> reference, GraphStage stage, const MatcherParams& params) {
  MatchResult result;
  result.selected.assign(candidates.begin(), candidates.end());
  const std::size_t n = candidates.size();
  if (n == 0) {
    return result;
  }
  for (const auto& c : candidates) {
    if (c.latent_index >= latent.size() || c.reference_index >= reference.size()) {
      throw std::invalid_argument("correspondence index out of range");
    }
  }
  if (n == 1) {
    return single_survivor(candidates.front(), std::move(result.selected));
  }

  if (stage == GraphStage::kSimplified) {
    std::vector<double> support(n, 0.0);
    std::vector<std::pair<double, std::size_t>> near;
    for (std::size_t a = 0; a < n; ++a) {
      const auto& la = latent[candidates[a].latent_index];
      const auto& ra = reference[candidates[a].reference_index];
      near.clear();
      for (std::size_t b = 0; b < n; ++b) {
        if (b == a) {
          continue;
        }
        const auto& lb = latent[candidates[b].latent_index];
        const auto& rb = reference[candidates[b].reference_index];
        const double lx = lb.x - la.x, ly = lb.y - la.y, rx = rb.x - ra.x, ry = rb.y - ra.y;
        near.emplace_back(std::sqrt(lx * lx + ly * ly) + std::sqrt(rx * rx + ry * ry), b);
      }
      const std::size_t k = std::min(params.k_s, near.size());
      std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k), near.end());
      for (std::size_t t = 0; t < k; ++t) {
        support[a] += compatibility(candidates[a], candidates[near[t].second], latent, reference, params);
      }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return support[x] > support[y]; });
    const std::size_t keep = (n + 1) / 2;
    order.resize(keep);
    std::sort(order.begin(), order.end());
    for (auto i : order) {
      if (candidates[i].similarity > 0.0) {
        result.surviving.push_back(candidates[i]);
      }
    }
    result.score = survivor_score(result.surviving, latent, reference, params);
    if (result.score <= 0.0) {
      result.score = 0.0;
      result.surviving.clear();
    }
    return result;
  }

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double c = compatibility(candidates[a], candidates[b], latent, reference, params);
      w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = c;
      w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = c;
    }
  }
  Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / std::sqrt(static_cast<double>(n)));
  bool degenerate = w.isZero(0.0);
  if (!degenerate) {
    // the identity shift keeps the iteration on the Perron vector
    for (int it = 0; it < params.power_iterations; ++it) {
      Eigen::VectorXd y = w * x + x;
      const double norm = y.norm();
      if (!(norm > 0.0)) {
        degenerate = true;
        break;
      }
      y /= norm;
      const double change = (y - x).norm();
      x = std::move(y);
      if (change < 1e-12) {
        break;
      }
    }
  }
  if (degenerate) {
    // no pairwise structure: best single candidate
    const auto best = std::min_element(candidates.begin(), candidates.end(), ranks_before);
    return single_survivor(*best, std::move(result.selected));
  }
  const double max_x = x.maxCoeff();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[static_cast<Eigen::Index>(a)] > x[static_cast<Eigen::Index>(b)]; });
  std::vector<std::size_t> used_l;
  std::vector<std::size_t> used_r;
  for (auto i : order) {
    const double xi = x[static_cast<Eigen::Index>(i)];
    if (!(xi > 0.0) || xi < params.rho * max_x) {
      break;
    }
    const auto& c = candidates[i];
    if (c.similarity <= 0.0) {
      continue;
    }
    if (std::find(used_l.begin(), used_l.end(), c.latent_index) != used_l.end() ||
        std::find(used_r.begin(), used_r.end(), c.reference_index) != used_r.end()) {
      continue;
    }
    used_l.push_back(c.latent_index);
    used_r.push_back(c.reference_index);
    result.surviving.push_back(c);
  }
  result.score = survivor_score(result.surviving, latent, reference, params);
  if (result.score <= 0.0) {
    result.score = 0.0;
    result.surviving.clear();
  }
  return result;
}

MatchResult match_candidates(std::vector<Correspondence> selected, std::span<const Minutia> latent,
                             std::span<const Minutia> reference, const MatcherParams& params) {
  if (selected.empty()) {
    return {};
  }
  if (selected.size() == 1) {
    auto c = selected.front();
    return single_survivor(c, std::move(selected));
  }
  const auto coarse = second_order_match(selected, latent, reference, GraphStage::kSimplified, params);
  auto fine = second_order_match(coarse.surviving, latent, reference, GraphStage::kFull, params);
  fine.selected = std::move(selected);
  return fine;
}

MatchResult compare_packed_minutiae(const PackedMinutiae& latent, const PackedMinutiae& reference,
                                    const MatcherParams& params) {
  if (latent.size() == 0 || reference.size() == 0) {
    return {};
  }
  const auto s = packed_similarity(latent, reference);
  const auto sn = normalize_similarity(s, params.normalization_epsilon);
  auto selected = select_top_correspondences(sn, params.n_minutiae, SelectionMode::kMinutiae, s);
  return match_candidates(std::move(selected), latent.minutiae, reference.minutiae, params);
}

MatchResult compare_minutiae_templates(const MinutiaeTemplate& latent, const MinutiaeTemplate& reference,
                                       const MatcherParams& params) {
  return compare_packed_minutiae(PackedMinutiae::pack(latent), PackedMinutiae::pack(reference), params);
}

MatchResult compare_texture_templates(const TextureTemplate& latent, const TextureTemplate& reference,
                                      const PqCodebook& codebook, double d0, const MatcherParams& params) {
  if (latent.empty() || reference.empty()) {
    return {};
  }
  SimilarityMatrix s(static_cast<Eigen::Index>(latent.size()), static_cast<Eigen::Index>(reference.size()));
  for (std::size_t i = 0; i < latent.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      const float d = adc_distance(latent.descriptors[i], reference.descriptors[j], codebook);
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::max(0.0, d0 - static_cast<double>(d));
    }
  }
  auto selected = select_top_correspondences(s, params.n_texture, SelectionMode::kTexture, s, params.texture_per_row);
  return match_candidates(std::move(selected), latent.minutiae, reference.minutiae, params);
}

PackedTextureReference PackedTextureReference::pack(const TextureTemplate& tpl) {
  PackedTextureReference p;
  p.minutiae = tpl.minutiae;
  if (tpl.minutiae.size() != tpl.descriptors.size()) {
    throw std::invalid_argument("template minutiae and descriptors differ in count");
  }
  for (const auto& d : tpl.descriptors) {
    if (d.stage != DescriptorStage::kQuantized) {
      throw std::invalid_argument("reference texture descriptors must be quantized");
    }
    if (p.subquantizers == 0) {
      p.subquantizers = d.codes.size();
    } else if (d.codes.size() != p.subquantizers) {
      throw std::invalid_argument("code lengths differ within a template");
    }
    p.codes.insert(p.codes.end(), d.codes.begin(), d.codes.end());
  }
  return p;
}

PreparedTextureProbe PreparedTextureProbe::prepare(const TextureTemplate& tpl, const PqCodebook& codebook) {
  PreparedTextureProbe p;
  p.minutiae = tpl.minutiae;
  if (tpl.minutiae.size() != tpl.descriptors.size()) {
    throw std::invalid_argument("template minutiae and descriptors differ in count");
  }
  p.tables.reserve(tpl.size());
  for (const auto& d : tpl.descriptors) {
    if (d.stage != DescriptorStage::kCompressed) {
      throw std::invalid_argument("latent texture descriptors must be compressed");
    }
    p.tables.emplace_back(codebook, d.values);
  }
  return p;
}

MatchResult compare_texture_prepared(const PreparedTextureProbe& latent, const PackedTextureReference& reference,
                                     double d0, const MatcherParams& params) {
  if (latent.size() == 0 || reference.size() == 0) {
    return {};
  }
  const std::size_t m = reference.subquantizers;
  if (latent.tables.front().subquantizers() != m) {
    throw std::invalid_argument("probe tables and reference codes disagree on subquantizer count");
  }
  const std::size_t per_row = params.texture_per_row;
  std::vector<Correspondence> pool;
  pool.reserve(latent.size() * per_row);
  std::vector<std::pair<float, std::size_t>> best;  // ascending distance, then index
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const auto& table = latent.tables[i];
    best.clear();
    const std::uint8_t* codes = reference.codes.data();
    auto offer = [&](float d, std::size_t j) {
      if (best.size() == per_row && !(d < best.back().first)) {
        return;
      }
      auto pos = best.begin();
      while (pos != best.end() && !(d < pos->first)) {
        ++pos;
      }
      best.insert(pos, {d, j});
      if (best.size() > per_row) {
        best.pop_back();
      }
    };
    // blocks of references summed side by side; each sum keeps the table order
    constexpr std::size_t kBlock = 8;
    std::size_t j = 0;
    for (; j + kBlock <= reference.size(); j += kBlock, codes += kBlock * m) {
      std::array<float, kBlock> d{};
      for (std::size_t q = 0; q < m; ++q) {
        const float* row = table.row(q);
        for (std::size_t b = 0; b < kBlock; ++b) {
          d[b] += row[codes[b * m + q]];
        }
      }
      for (std::size_t b = 0; b < kBlock; ++b) {
        offer(d[b], j + b);
      }
    }
    for (; j < reference.size(); ++j, codes += m) {
      offer(table.distance({codes, m}), j);
    }
    for (const auto& [d, j] : best) {
      const double s = std::max(0.0, d0 - static_cast<double>(d));
      if (s > 0.0) {
        pool.push_back({i, j, s});
      }
    }
  }
  keep_top(pool, params.n_texture);
  return match_candidates(std::move(pool), latent.minutiae, reference.minutiae, params);
}

double fuse_scores(double s1, double s2, double s3, double st, const FusionWeights& weights) {
  return weights.minutiae1 * s1 + weights.minutiae2 * s2 + weights.minutiae3 * s3 + weights.texture * st;
}

std::string format_match_debug(const MatchResult& result, std::span<const Minutia> latent,
                               std::span<const Minutia> reference) {
  std::ostringstream out;
  out << "score " << result.score << "\n";
  for (const auto& c : result.selected) {
    out << "selected " << c.latent_index << " " << c.reference_index << " " << c.similarity << "\n";
  }
  for (const auto& c : result.surviving) {
    const auto& l = latent[c.latent_index];
    const auto& r = reference[c.reference_index];
    out << "surviving " << c.latent_index << " " << c.reference_index << " " << c.similarity << " " << l.x << " "
        << l.y << " " << r.x << " " << r.y << "\n";
  }
  return out.str();
}

}  // namespace lfs
