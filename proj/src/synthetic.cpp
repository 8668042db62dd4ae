#include "lfs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lfs/angles.hpp"

namespace lfs {

GrayImage sinusoid_image(int width, int height, double orientation, double period, double phase, double mean,
                         double amplitude) {
  GrayImage img(width, height);
  const double nx = -std::sin(orientation);
  const double ny = std::cos(orientation);
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = (x - cx) * nx + (y - cy) * ny;
      img.at(x, y) = static_cast<float>(mean + amplitude * std::cos(kTwoPi * t / period + phase));
    }
  }
  return img;
}

GrayImage noise_image(int width, int height, double mean, double sigma, std::uint64_t seed) {
  GrayImage img(width, height);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(mean, sigma);
  for (auto& v : img.pixels) {
    v = static_cast<float>(std::clamp(n(rng), 0.0, 255.0));
  }
  return img;
}

namespace {

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// signed distance-like value: < 1 inside the ellipse
double ellipse_radius(double x, double y, double cx, double cy, double ax, double ay) {
  const double u = (x - cx) / ax;
  const double v = (y - cy) / ay;
  return std::sqrt(u * u + v * v);
}

}  // namespace

SyntheticPrint synthesize_print(const PrintOptions& o) {
  if (o.width <= 0 || o.height <= 0 || !(o.period > 0.0)) {
    throw std::invalid_argument("synthesize_print: bad dimensions or period");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double alpha = uni(rng) * kPi;
  const double p1 = uni(rng) * kTwoPi;
  const double p2 = uni(rng) * kTwoPi;
  const double nx = -std::sin(alpha);
  const double ny = std::cos(alpha);
  const double cx = o.width / 2.0;
  const double cy = o.height / 2.0;
  const double ax = 0.42 * o.width;
  const double ay = 0.46 * o.height;

  auto base_t = [&](double x, double y) {
    return (x - cx) * nx + (y - cy) * ny +
           o.warp * (12.0 * std::sin(kTwoPi * y / 300.0 + p1) + 10.0 * std::sin(kTwoPi * x / 350.0 + p2));
  };

  struct Spiral {
    double x, y, sign;
  };
  std::vector<Spiral> spirals;
  int attempts = 0;
  while (static_cast<int>(spirals.size()) < o.minutiae && attempts < 20000) {
    ++attempts;
    const double x = uni(rng) * o.width;
    const double y = uni(rng) * o.height;
    if (ellipse_radius(x, y, cx, cy, ax, ay) > 0.75) {
      continue;
    }
    bool ok = true;
    for (const auto& s : spirals) {
      if (std::hypot(s.x - x, s.y - y) < o.min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) {
      spirals.push_back({std::round(x), std::round(y), uni(rng) < 0.5 ? -1.0 : 1.0});
    }
  }

  SyntheticPrint print;
  print.image = GrayImage(o.width, o.height);
  print.foreground.assign(static_cast<std::size_t>(o.width) * o.height, 0);
  for (int y = 0; y < o.height; ++y) {
    for (int x = 0; x < o.width; ++x) {
      double psi = kTwoPi * base_t(x, y) / o.period;
      for (const auto& s : spirals) {
        psi += s.sign * std::atan2(y - s.y, x - s.x);
      }
      const double r = ellipse_radius(x, y, cx, cy, ax, ay);
      const double ink = 1.0 - smoothstep(0.97, 1.03, r);
      const double ridge = 127.5 - 100.0 * std::cos(psi);
      print.image.at(x, y) = static_cast<float>(ink * ridge + (1.0 - ink) * 220.0);
      print.foreground[static_cast<std::size_t>(y) * o.width + x] = r < 1.0 ? 1 : 0;
    }
  }
  for (const auto& s : spirals) {
    const double gx = base_t(s.x + 0.5, s.y) - base_t(s.x - 0.5, s.y);
    const double gy = base_t(s.x, s.y + 0.5) - base_t(s.x, s.y - 0.5);
    const double flow = wrap_pi(std::atan2(gy, gx) + kPi / 2.0);
    print.minutiae.push_back({s.x, s.y, wrap_two_pi(flow + (s.sign > 0 ? 0.0 : kPi)), MinutiaKind::kReal});
  }
  return print;
}

GrayImage degrade_image(const GrayImage& image, double noise_sigma, double blur_sigma, std::uint64_t seed) {
  GrayImage out = gaussian_blur(image, blur_sigma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  for (auto& v : out.pixels) {
    const double e = noise_sigma > 0.0 ? n(rng) : 0.0;
    v = static_cast<float>(std::clamp(v + e, 0.0, 255.0));
  }
  return out;
}

GrayImage make_latent(const GrayImage& print, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int w = print.width;
  const int h = print.height;
  const double cx = w * (0.4 + 0.2 * uni(rng));
  const double cy = h * (0.4 + 0.2 * uni(rng));
  const double ax = w * (0.28 + 0.1 * uni(rng));
  const double ay = h * (0.3 + 0.1 * uni(rng));
  const auto background = gaussian_blur(noise_image(w, h, 150.0, 40.0, seed ^ 0x5bd1e995ULL), 4.0);
  std::normal_distribution<double> pixel(0.0, 10.0);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = ellipse_radius(x, y, cx, cy, ax, ay);
      const double keep = 1.0 - smoothstep(0.9, 1.1, r);
      const double ridge = 150.0 + 0.55 * (print.at(x, y) - 127.5);
      const double v = keep * ridge + (1.0 - keep) * background.at(x, y) + pixel(rng);
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 255.0));
    }
  }
  return gaussian_blur(out, 0.7);
}

DescriptorGenerator::DescriptorGenerator(std::size_t dim, std::size_t latent_dim, std::uint64_t seed)
    : a_(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(latent_dim)), b_(static_cast<Eigen::Index>(dim)) {
  if (dim == 0 || latent_dim == 0) {
    throw std::invalid_argument("descriptor generator needs positive dimensions");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const double scale = 1.5 / std::sqrt(static_cast<double>(latent_dim));
  for (Eigen::Index r = 0; r < a_.rows(); ++r) {
    for (Eigen::Index c = 0; c < a_.cols(); ++c) {
      a_(r, c) = n(rng) * scale;
    }
    b_[r] = 0.3 * n(rng);
  }
}

std::vector<float> DescriptorGenerator::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd z(a_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = n(rng);
  }
  const Eigen::VectorXd y = (a_ * z + b_).array().tanh().matrix();
  const double norm = y.norm();
  std::vector<float> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<float>(norm > 0.0 ? y[i] / norm : 0.0);
  }
  return out;
}

std::vector<std::vector<float>> descriptor_corpus(const DescriptorGenerator& gen, std::size_t count,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<float>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(gen.sample(rng));
  }
  return out;
}

std::vector<float> perturb_descriptor(std::span<const float> values, double eps, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, eps > 0.0 ? eps : 1.0);
  std::vector<double> v(values.begin(), values.end());
  double ss = 0.0;
  for (auto& x : v) {
    if (eps > 0.0) {
      x += n(rng);
    }
    ss += x * x;
  }
  const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(v[i] * inv);
  }
  return out;
}

SyntheticReference synthesize_reference(const std::string& id, const DescriptorGenerator& gen,
                                        const SyntheticGalleryOptions& o, std::mt19937_64& rng) {
  SyntheticReference ref;
  ref.id = id;
  ref.minutiae.source = TemplateSource::kReference;
  std::uniform_real_distribution<double> ux(32.0, o.width - 33.0);
  std::uniform_real_distribution<double> uy(32.0, o.height - 33.0);
  std::uniform_real_distribution<double> ut(0.0, kTwoPi);
  int attempts = 0;
  while (ref.minutiae.size() < o.minutiae && attempts < 100000) {
    ++attempts;
    const Minutia m{ux(rng), uy(rng), wrap_two_pi(ut(rng)), MinutiaKind::kReal};
    const bool ok = std::none_of(ref.minutiae.minutiae.begin(), ref.minutiae.minutiae.end(), [&](const Minutia& q) {
      return std::hypot(q.x - m.x, q.y - m.y) < o.min_separation;
    });
    if (!ok) {
      continue;
    }
    ref.minutiae.minutiae.push_back(m);
    ref.minutiae.descriptors.push_back(Descriptor::compressed(gen.sample(rng)));
  }
  std::uniform_real_distribution<double> uf(0.0, kPi);
  for (int y = 0; y < o.height; y += o.stride) {
    for (int x = 0; x < o.width; x += o.stride) {
      if (x - o.border_margin < 0 || y - o.border_margin < 0 || x + o.border_margin >= o.width ||
          y + o.border_margin >= o.height) {
        continue;
      }
      ref.texture.minutiae.push_back(
          {static_cast<double>(x), static_cast<double>(y), uf(rng), MinutiaKind::kVirtual});
      ref.texture.descriptors.push_back(Descriptor::compressed(gen.sample(rng)));
    }
  }
  return ref;
}

namespace {

struct Rigid {
  double angle = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Minutia apply(const Minutia& m) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double dx = m.x - cx;
    const double dy = m.y - cy;
    return {cx + c * dx - s * dy + tx, cy + s * dx + c * dy + ty, wrap_two_pi(m.theta + angle), m.kind};
  }
};

bool inside(const Minutia& m, int w, int h) { return m.x >= 0.0 && m.y >= 0.0 && m.x < w && m.y < h; }

template <typename Tpl>
Tpl perturb_set(const Tpl& src, const Rigid& t, const DescriptorGenerator& gen, const SyntheticGalleryOptions& g,
                double deletion, double spurious, double noise, MinutiaKind kind, std::mt19937_64& rng) {
  const std::size_t n = src.minutiae.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto removed = static_cast<std::size_t>(std::lround(deletion * static_cast<double>(n)));
  order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(removed, n)));

  std::vector<std::pair<Minutia, std::vector<float>>> items;
  for (auto i : order) {
    const auto m = t.apply(src.minutiae[i]);
    if (!inside(m, g.width, g.height)) {
      continue;
    }
    items.emplace_back(m, perturb_descriptor(src.descriptors[i].values, noise, rng));
  }
  const auto extra = static_cast<std::size_t>(std::lround(spurious * static_cast<double>(n)));
  std::uniform_real_distribution<double> ux(0.0, g.width - 1.0);
  std::uniform_real_distribution<double> uy(0.0, g.height - 1.0);
  std::uniform_real_distribution<double> ut(0.0, kTwoPi);
  for (std::size_t e = 0; e < extra; ++e) {
    items.emplace_back(Minutia{ux(rng), uy(rng), wrap_two_pi(ut(rng)), kind}, gen.sample(rng));
  }
  std::shuffle(items.begin(), items.end(), rng);
  Tpl out;
  for (auto& [m, d] : items) {
    out.minutiae.push_back(m);
    out.descriptors.push_back(Descriptor::compressed(std::move(d)));
  }
  return out;
}

}  // namespace

SyntheticProbe perturb_reference(const SyntheticReference& ref, const DescriptorGenerator& gen,
                                 const SyntheticGalleryOptions& gallery, const PerturbOptions& options,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ur(-options.max_rotation, options.max_rotation);
  std::uniform_real_distribution<double> ut(-options.max_translation, options.max_translation);
  Rigid t;
  t.angle = ur(rng);
  t.tx = ut(rng);
  t.ty = ut(rng);
  t.cx = gallery.width / 2.0;
  t.cy = gallery.height / 2.0;
  SyntheticProbe probe;
  const std::array<TemplateSource, 3> sources{TemplateSource::kLatentStft, TemplateSource::kLatentEnhanced,
                                              TemplateSource::kLatentCommon};
  for (std::size_t k = 0; k < 3; ++k) {
    probe.minutiae[k] = perturb_set(ref.minutiae, t, gen, gallery, options.deletion, options.spurious,
                                    options.descriptor_noise, MinutiaKind::kReal, rng);
    probe.minutiae[k].source = sources[k];
  }
  probe.texture = perturb_set(ref.texture, t, gen, gallery, options.deletion, 0.0, options.descriptor_noise,
                              MinutiaKind::kVirtual, rng);
  return probe;
}

}  // namespace lfs
