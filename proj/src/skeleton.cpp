#include "lfs/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include "lfs/angles.hpp"

namespace lfs {
namespace {

// clockwise from north: P2..P9 in Zhang-Suen notation
constexpr std::array<int, 8> kDx{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kDy{-1, -1, 0, 1, 1, 1, 0, -1};
// 4-neighbours first so traces follow staircases pixel by pixel
constexpr std::array<int, 8> kTraceOrder{0, 2, 4, 6, 1, 3, 5, 7};

using Point = std::pair<int, int>;

int neighbour_count(const BinaryImage& s, int x, int y) noexcept {
  int n = 0;
  for (int k = 0; k < 8; ++k) {
    n += s.get(x + kDx[k], y + kDy[k]) ? 1 : 0;
  }
  return n;
}

// Follows the skeleton for up to `length` steps, never revisiting `visited`.
std::vector<Point> trace(const BinaryImage& s, Point start, std::vector<Point> visited, int length) {
  std::vector<Point> path{start};
  visited.push_back(start);
  Point cur = start;
  for (int step = 0; step < length; ++step) {
    bool moved = false;
    for (int k : kTraceOrder) {
      const Point next{cur.first + kDx[k], cur.second + kDy[k]};
      if (!s.get(next.first, next.second)) {
        continue;
      }
      if (std::find(visited.begin(), visited.end(), next) != visited.end()) {
        continue;
      }
      visited.push_back(next);
      path.push_back(next);
      cur = next;
      moved = true;
      break;
    }
    if (!moved) {
      break;
    }
  }
  return path;
}

}  // namespace

std::size_t BinaryImage::count() const noexcept {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

BinaryImage binarize_ridges(const GrayImage& image, const RidgeFields& fields) {
  BinaryImage out(image.width, image.height);
  if (fields.empty()) {
    return out;
  }
  const auto smooth = gaussian_blur(image, 1.0);
  const auto local = box_mean(smooth, 6);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      if (fields.roi_at_pixel(x, y) && smooth.at(x, y) < local.at(x, y)) {
        out.set(x, y, true);
      }
    }
  }
  return out;
}

BinaryImage thin(BinaryImage img) {
  const int w = img.width;
  const int h = img.height;
  std::vector<std::size_t> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!img.get(x, y)) {
            continue;
          }
          std::array<int, 8> p{};
          int b = 0;
          for (int k = 0; k < 8; ++k) {
            p[k] = img.get(x + kDx[k], y + kDy[k]) ? 1 : 0;
            b += p[k];
          }
          if (b < 2 || b > 6) {
            continue;
          }
          int a = 0;
          for (int k = 0; k < 8; ++k) {
            a += (p[k] == 0 && p[(k + 1) % 8] == 1) ? 1 : 0;
          }
          if (a != 1) {
            continue;
          }
          // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
          const bool cond = pass == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                      : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (cond) {
            marked.push_back(static_cast<std::size_t>(y) * w + x);
          }
        }
      }
      for (auto i : marked) {
        img.pixels[i] = 0;
      }
      changed = changed || !marked.empty();
    }
  }
  return img;
}

int crossing_number(const BinaryImage& s, int x, int y) noexcept {
  int t = 0;
  for (int k = 0; k < 8; ++k) {
    const int a = s.get(x + kDx[k], y + kDy[k]) ? 1 : 0;
    const int b = s.get(x + kDx[(k + 1) % 8], y + kDy[(k + 1) % 8]) ? 1 : 0;
    t += std::abs(a - b);
  }
  return t / 2;
}

BinaryImage prune_spurs(BinaryImage s, int min_length) {
  for (int round = 0; round < 2; ++round) {
    std::vector<Point> removal;
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        if (!s.get(x, y) || crossing_number(s, x, y) != 1) {
          continue;
        }
        std::vector<Point> path{{x, y}};
        Point cur{x, y};
        bool reached_junction = false;
        while (static_cast<int>(path.size()) < min_length) {
          bool moved = false;
          for (int k : kTraceOrder) {
            const Point next{cur.first + kDx[k], cur.second + kDy[k]};
            if (!s.get(next.first, next.second) || std::find(path.begin(), path.end(), next) != path.end()) {
              continue;
            }
            if (crossing_number(s, next.first, next.second) >= 3 || neighbour_count(s, next.first, next.second) > 3) {
              reached_junction = true;
            } else {
              path.push_back(next);
              cur = next;
              moved = true;
            }
            break;
          }
          if (!moved) {
            break;
          }
        }
        const bool isolated = !reached_junction && static_cast<int>(path.size()) < min_length;
        if ((reached_junction && static_cast<int>(path.size()) < min_length) || isolated) {
          removal.insert(removal.end(), path.begin(), path.end());
        }
      }
    }
    if (removal.empty()) {
      break;
    }
    for (const auto& [x, y] : removal) {
      s.set(x, y, false);
    }
  }
  return s;
}

std::vector<Minutia> skeleton_minutiae(const BinaryImage& s, const RidgeFields& fields, const SkeletonParams& params) {
  std::vector<Minutia> found;
  const int margin = static_cast<int>(std::ceil(params.border_margin));
  auto well_inside = [&](int x, int y) {
    for (int dy = -margin; dy <= margin; dy += margin) {
      for (int dx = -margin; dx <= margin; dx += margin) {
        if (!fields.roi_at_pixel(x + dx, y + dy)) {
          return false;
        }
      }
    }
    return true;
  };
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (!s.get(x, y)) {
        continue;
      }
      const int cn = crossing_number(s, x, y);
      if (cn != 1 && cn != 3) {
        continue;
      }
      if (!well_inside(x, y)) {
        continue;
      }
      if (cn == 1) {
        const auto path = trace(s, {x, y}, {}, params.trace_length);
        if (path.size() < 2) {
          continue;
        }
        const auto [ex, ey] = path.back();
        found.push_back({static_cast<double>(x), static_cast<double>(y),
                         wrap_two_pi(std::atan2(static_cast<double>(y - ey), static_cast<double>(x - ex))),
                         MinutiaKind::kReal});
        continue;
      }
      // branch starts: first set pixel of each run in the cyclic neighbourhood
      std::vector<Point> starts;
      for (int k = 0; k < 8; ++k) {
        const bool here = s.get(x + kDx[k], y + kDy[k]);
        const bool before = s.get(x + kDx[(k + 7) % 8], y + kDy[(k + 7) % 8]);
        if (here && !before) {
          starts.push_back({x + kDx[k], y + kDy[k]});
        }
      }
      if (starts.size() != 3) {
        continue;
      }
      std::vector<double> dirs;
      for (const auto& st : starts) {
        std::vector<Point> blocked{{x, y}};
        for (const auto& other : starts) {
          if (other != st) {
            blocked.push_back(other);
          }
        }
        const auto path = trace(s, st, blocked, params.trace_length - 1);
        const auto [ex, ey] = path.back();
        dirs.push_back(wrap_two_pi(std::atan2(static_cast<double>(ey - y), static_cast<double>(ex - x))));
      }
      std::size_t a = 0;
      std::size_t b = 1;
      double best = angle_diff(dirs[0], dirs[1]);
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
          const double d = angle_diff(dirs[i], dirs[j]);
          if (d < best) {
            best = d;
            a = i;
            b = j;
          }
        }
      }
      const std::array<double, 2> pair{dirs[a], dirs[b]};
      found.push_back({static_cast<double>(x), static_cast<double>(y), circular_mean(pair), MinutiaKind::kReal});
    }
  }
  std::vector<bool> drop(found.size(), false);
  for (std::size_t i = 0; i < found.size(); ++i) {
    for (std::size_t j = i + 1; j < found.size(); ++j) {
      if (std::hypot(found[i].x - found[j].x, found[i].y - found[j].y) < params.min_separation) {
        drop[i] = true;
        drop[j] = true;
      }
    }
  }
  std::vector<Minutia> out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!drop[i]) {
      out.push_back(found[i]);
    }
  }
  return out;
}

}  // namespace lfs
