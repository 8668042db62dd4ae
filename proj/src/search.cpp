#include "lfs/search.hpp"

#include <algorithm>
#include <thread>

namespace lfs {

PreparedProbe PreparedProbe::prepare(const std::array<MinutiaeTemplate, 3>& minutiae, const TextureTemplate& texture,
                                     const PqCodebook& codebook) {
  PreparedProbe p;
  for (std::size_t k = 0; k < 3; ++k) {
    p.minutiae[k] = PackedMinutiae::pack(minutiae[k]);
  }
  p.texture = PreparedTextureProbe::prepare(texture, codebook);
  return p;
}

SearchOptions search_options(const EngineConfig& config, double model_d0) {
  SearchOptions o;
  o.topk = config.topk;
  o.workers = config.workers;
  o.matcher = config.matcher;
  o.weights = config.weights;
  o.d0 = config.d0 > 0.0 ? config.d0 : model_d0;
  return o;
}

CandidateDetail explain_candidate(const PreparedProbe& probe, const GalleryEntry& reference,
                                  const SearchOptions& options) {
  CandidateDetail d;
  d.entry.reference_id = reference.id;
  for (std::size_t k = 0; k < 3; ++k) {
    d.minutiae[k] = compare_packed_minutiae(probe.minutiae[k], reference.minutiae, options.matcher);
    d.entry.minutiae_scores[k] = d.minutiae[k].score;
  }
  d.texture = compare_texture_prepared(probe.texture, reference.texture, options.d0, options.matcher);
  d.entry.texture_score = d.texture.score;
  d.entry.score = fuse_scores(d.entry.minutiae_scores[0], d.entry.minutiae_scores[1], d.entry.minutiae_scores[2],
                              d.entry.texture_score, options.weights);
  return d;
}

CandidateEntry score_reference(const PreparedProbe& probe, const GalleryEntry& reference,
                               const SearchOptions& options) {
  return explain_candidate(probe, reference, options).entry;
}

std::vector<CandidateEntry> score_all(const PreparedProbe& probe, const GalleryIndex& index,
                                      const SearchOptions& options) {
  std::vector<CandidateEntry> out(index.size());
  const auto& entries = index.entries();
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, entries.size()));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = score_reference(probe, entries[i], options);
    }
  };
  if (workers == 1) {
    run(0, entries.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (entries.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = std::min(entries.size(), w * chunk);
    const std::size_t e = std::min(entries.size(), b + chunk);
    pool.emplace_back(run, b, e);
  }
  for (auto& t : pool) {
    t.join();
  }
  return out;
}

CandidateList search_gallery(const PreparedProbe& probe, const GalleryIndex& index, const SearchOptions& options) {
  const auto& entries = index.entries();
  if (entries.empty() || options.topk == 0) {
    return {};
  }
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, entries.size()));
  const std::size_t chunk = (entries.size() + workers - 1) / workers;
  std::vector<std::vector<CandidateEntry>> shards(workers);
  auto run = [&](std::size_t w) {
    const std::size_t b = std::min(entries.size(), w * chunk);
    const std::size_t e = std::min(entries.size(), b + chunk);
    std::vector<CandidateEntry> local;
    local.reserve(e - b);
    for (std::size_t i = b; i < e; ++i) {
      local.push_back(score_reference(probe, entries[i], options));
    }
    shards[w] = rank_candidates(std::move(local), options.topk).entries;
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(run, w);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  std::vector<CandidateEntry> merged;
  for (auto& s : shards) {
    merged.insert(merged.end(), s.begin(), s.end());
  }
  return rank_candidates(std::move(merged), options.topk);
}

}  // namespace lfs
