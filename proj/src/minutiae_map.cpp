#include "lfs/minutiae_map.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "lfs/angles.hpp"
#include "lfs/skeleton.hpp"
#include "lfs/template_io.hpp"

namespace lfs {

MinutiaeMap::MinutiaeMap(int height, int width) : height_(height), width_(width) {
  if (height < 0 || width < 0) {
    throw std::invalid_argument("minutiae map dimensions must be non-negative");
  }
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * kMapChannels, 0.0f);
}

MinutiaeMap encode_minutiae_map(std::span<const Minutia> minutiae, int height, int width,
                                const EncoderParams& params) {
  if (!(params.sigma_s > 0.0) || !(params.sigma_o > 0.0)) {
    throw std::invalid_argument("encoder widths must be positive");
  }
  MinutiaeMap map(height, width);
  const int radius = static_cast<int>(std::ceil(5.0 * params.sigma_s));
  const double inv_s = 1.0 / (2.0 * params.sigma_s * params.sigma_s);
  const double inv_o = 1.0 / (2.0 * params.sigma_o * params.sigma_o);
  for (const auto& m : minutiae) {
    if (!(m.x >= 0.0 && m.y >= 0.0 && m.x < width && m.y < height)) {
      throw std::invalid_argument("minutia outside the map");
    }
    std::array<double, kMapChannels> co{};
    for (int k = 0; k < kMapChannels; ++k) {
      const double d = angle_diff(wrap_two_pi(m.theta), k * kChannelStep);
      co[k] = std::exp(-d * d * inv_o);
    }
    const int ci = static_cast<int>(std::lround(m.y));
    const int cj = static_cast<int>(std::lround(m.x));
    for (int i = std::max(0, ci - radius); i <= std::min(height - 1, ci + radius); ++i) {
      const double dy = i - m.y;
      for (int j = std::max(0, cj - radius); j <= std::min(width - 1, cj + radius); ++j) {
        const double dx = j - m.x;
        const double cs = std::exp(-(dx * dx + dy * dy) * inv_s);
        float* cell = &map.values()[map.offset(i, j, 0)];
        for (int k = 0; k < kMapChannels; ++k) {
          cell[k] += static_cast<float>(cs * co[k]);
        }
      }
    }
  }
  return map;
}

double parabola_peak_angle(double a, double b, double d, int c) noexcept {
  const double curvature = a - 2.0 * b + d;
  double delta = 0.0;
  if (curvature < 0.0) {
    delta = (a - d) / (2.0 * curvature);
  }
  return wrap_two_pi((c + delta) * kChannelStep);
}

double interpolate_orientation(const MinutiaeMap& map, int i, int j, int c) noexcept {
  const int prev = (c + kMapChannels - 1) % kMapChannels;
  const int next = (c + 1) % kMapChannels;
  return parabola_peak_angle(map.at(i, j, prev), map.at(i, j, c), map.at(i, j, next), c);
}

std::vector<Minutia> decode_minutiae_map(const MinutiaeMap& map, double m_t) {
  std::vector<Minutia> out;
  const int h = map.height();
  const int w = map.width();
  const auto& v = map.values();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < kMapChannels; ++k) {
        const std::size_t self = map.offset(i, j, k);
        const float value = v[self];
        if (!(value > m_t)) {
          continue;
        }
        bool peak = true;
        for (int di = -2; di <= 2 && peak; ++di) {
          const int ii = i + di;
          if (ii < 0 || ii >= h) {
            continue;
          }
          for (int dj = -2; dj <= 2 && peak; ++dj) {
            const int jj = j + dj;
            if (jj < 0 || jj >= w) {
              continue;
            }
            for (int dk = -1; dk <= 1; ++dk) {
              const int kk = (k + dk + kMapChannels) % kMapChannels;
              const std::size_t other = map.offset(ii, jj, kk);
              if (other == self) {
                continue;
              }
              const float nv = v[other];
              if (nv > value || (nv == value && other < self)) {
                peak = false;
                break;
              }
            }
          }
        }
        if (peak) {
          out.push_back({static_cast<double>(j), static_cast<double>(i), interpolate_orientation(map, i, j, k),
                         MinutiaKind::kReal});
        }
      }
    }
  }
  return out;
}

namespace {

struct Pooled {
  Minutia m;
  std::size_t set = 0;
};

bool matches(const Minutia& a, const Minutia& b, const VoteParams& p) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y) < p.max_distance && angle_diff(a.theta, b.theta) < p.max_angle;
}

}  // namespace

std::vector<Minutia> vote_common_minutiae(std::span<const std::vector<Minutia>> sets, const VoteParams& params) {
  if (sets.size() != 5) {
    throw std::invalid_argument("voting expects exactly five minutiae sets");
  }
  std::vector<Pooled> pool;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& m : sets[s]) {
      pool.push_back({m, s});
    }
  }
  std::vector<bool> used(pool.size(), false);
  std::vector<Minutia> out;

  // cluster seeded at `seed`: per other set, the nearest unused minutia that
  // matches every member taken so far
  auto grow = [&](std::size_t seed) {
    std::vector<std::size_t> members{seed};
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (s == pool[seed].set) {
        continue;
      }
      std::size_t best = pool.size();
      double best_d = 0.0;
      for (std::size_t q = 0; q < pool.size(); ++q) {
        if (used[q] || pool[q].set != s) {
          continue;
        }
        const bool ok = std::all_of(members.begin(), members.end(),
                                    [&](std::size_t p) { return matches(pool[p].m, pool[q].m, params); });
        if (!ok) {
          continue;
        }
        const double d = std::hypot(pool[q].m.x - pool[seed].m.x, pool[q].m.y - pool[seed].m.y);
        if (best == pool.size() || d < best_d) {
          best = q;
          best_d = d;
        }
      }
      if (best != pool.size()) {
        members.push_back(best);
      }
    }
    return members;
  };

  while (true) {
    std::vector<std::size_t> best_cluster;
    for (std::size_t seed = 0; seed < pool.size(); ++seed) {
      if (used[seed]) {
        continue;
      }
      auto cluster = grow(seed);
      if (cluster.size() > best_cluster.size()) {
        best_cluster = std::move(cluster);
      }
    }
    if (best_cluster.size() < static_cast<std::size_t>(std::max(params.min_votes, 1)) || best_cluster.empty()) {
      break;
    }
    double sx = 0.0;
    double sy = 0.0;
    std::vector<double> angles;
    for (auto p : best_cluster) {
      used[p] = true;
      sx += pool[p].m.x;
      sy += pool[p].m.y;
      angles.push_back(pool[p].m.theta);
    }
    const double n = static_cast<double>(best_cluster.size());
    out.push_back({sx / n, sy / n, circular_mean(angles), MinutiaKind::kReal});
  }
  return out;
}

std::vector<std::uint8_t> serialize_minutiae_map(const MinutiaeMap& map) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(map.height()));
  w.u32(static_cast<std::uint32_t>(map.width()));
  w.u32(kMapChannels);
  for (float v : map.values()) {
    w.f32(v);
  }
  return std::move(w).take();
}

MinutiaeMap deserialize_minutiae_map(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto h = r.u32();
  const auto w = r.u32();
  const auto c = r.u32();
  if (c != kMapChannels) {
    throw FormatError("minutiae map must have 12 channels");
  }
  const auto n = static_cast<std::uint64_t>(h) * w * c;
  if (r.remaining() != n * 4) {
    throw FormatError("minutiae map payload has the wrong size");
  }
  MinutiaeMap map(static_cast<int>(h), static_cast<int>(w));
  for (auto& v : map.values()) {
    v = r.f32();
    if (!(v >= 0.0f) || !std::isfinite(v)) {
      throw FormatError("minutiae map values must be finite and non-negative");
    }
  }
  return map;
}

void write_minutiae_map(const MinutiaeMap& map, const std::filesystem::path& path) {
  write_binary_file(serialize_minutiae_map(map), path);
}

MinutiaeMap read_minutiae_map(const std::filesystem::path& path) {
  return deserialize_minutiae_map(read_binary_file(path));
}

MinutiaeMap detect_minutiae_baseline(const ProcessedImage& enhanced, const RidgeFields& fields,
                                     const EncoderParams& params) {
  const auto& img = enhanced.pixels;
  if (fields.empty() || fields.roi_count() == 0) {
    return MinutiaeMap(img.height, img.width);
  }
  const auto skeleton = prune_spurs(thin(binarize_ridges(img, fields)));
  const auto found = skeleton_minutiae(skeleton, fields);
  return encode_minutiae_map(found, img.height, img.width, params);
}

}  // namespace lfs
