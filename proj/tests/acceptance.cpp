// Acceptance harness: one PASS/FAIL line per criterion. Exit status is 1 when
// any criterion fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lfs/angles.hpp"
#include "lfs/cmc.hpp"
#include "lfs/compressor.hpp"
#include "lfs/descriptor.hpp"
#include "lfs/gallery.hpp"
#include "lfs/matcher.hpp"
#include "lfs/minutiae_map.hpp"
#include "lfs/product_quantizer.hpp"
#include "lfs/ridge_analysis.hpp"
#include "lfs/search.hpp"
#include "lfs/synthetic.hpp"
#include "lfs/template_builder.hpp"

using namespace lfs;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- helpers

std::vector<Minutia> random_set(std::mt19937_64& rng, int count, double sep, int size) {
  std::uniform_real_distribution<double> pos(0.0, size - 1.0), ang(0.0, kTwoPi);
  std::vector<Minutia> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count && attempts++ < 100000) {
    const Minutia m{pos(rng), pos(rng), ang(rng), MinutiaKind::kReal};
    if (std::all_of(out.begin(), out.end(),
                    [&](const Minutia& q) { return std::hypot(q.x - m.x, q.y - m.y) >= sep; })) {
      out.push_back(m);
    }
  }
  return out;
}

// average ranks, ties share the mean position
std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
      ++j;
    }
    for (std::size_t t = i; t <= j; ++t) {
      r[idx[t]] = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    }
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks_of(a), ranks_of(b));
}

double cos_sim(const std::vector<float>& a, const std::vector<float>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return d / std::sqrt(na * nb);
}

// ---------------------------------------------------------------- criteria

Outcome map_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2025);
  std::uniform_int_distribution<int> count(1, 60);
  std::size_t planted = 0, recovered = 0, spurious = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto ms = random_set(rng, count(rng), 16.0, 512);
    const auto dec = decode_minutiae_map(encode_minutiae_map(ms, 512, 512));
    std::vector<bool> used(dec.size(), false);
    for (const auto& m : ms) {
      ++planted;
      for (std::size_t d = 0; d < dec.size(); ++d) {
        if (!used[d] && std::hypot(dec[d].x - m.x, dec[d].y - m.y) <= 2.0 &&
            angle_diff(dec[d].theta, m.theta) <= kPi / 36.0) {
          used[d] = true;
          ++recovered;
          break;
        }
      }
    }
    spurious += static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
  }
  const double secs = seconds_since(t0);
  return {recovered == planted && spurious == 0 && secs < 60.0,
          fmt("%zu/%zu recovered, %zu spurious, %.1f s", recovered, planted, spurious, secs)};
}

Outcome quadratic_interpolation() {
  double worst_angle = 0.0, worst_oracle = 0.0;
  bool single = true;
  for (int k = 0; k < 48; ++k) {
    // half-way between the 48 even steps, so never on a channel centre
    const double theta = (k + 0.5) * kTwoPi / 48.0;
    const std::vector<Minutia> one{{64, 64, theta, MinutiaKind::kReal}};
    const auto map = encode_minutiae_map(one, 128, 128);
    const auto dec = decode_minutiae_map(map);
    if (dec.size() != 1) {
      single = false;
      continue;
    }
    worst_angle = std::max(worst_angle, angle_diff(dec[0].theta, theta));
    // dense evaluation of the parabola through the peak channel and neighbours
    const int i = static_cast<int>(dec[0].y), j = static_cast<int>(dec[0].x);
    int c = 0;
    for (int q = 1; q < kMapChannels; ++q) {
      if (map.at(i, j, q) > map.at(i, j, c)) {
        c = q;
      }
    }
    const double a = map.at(i, j, (c + kMapChannels - 1) % kMapChannels);
    const double b = map.at(i, j, c);
    const double d = map.at(i, j, (c + 1) % kMapChannels);
    double best_t = 0.0, best_f = -1e300;
    const int steps = 2000000;
    for (int s = 0; s <= steps; ++s) {
      const double t = -1.0 + 2.0 * s / steps;
      const double f = a * t * (t - 1) / 2.0 - b * (t - 1) * (t + 1) + d * t * (t + 1) / 2.0;
      if (f > best_f) {
        best_f = f;
        best_t = t;
      }
    }
    const double oracle = wrap_two_pi((c + best_t) * kChannelStep);
    worst_oracle = std::max(worst_oracle, angle_diff(dec[0].theta, oracle));
  }
  return {single && worst_angle <= kPi / 72.0 && worst_oracle <= 1e-6,
          fmt("max error %.5f rad (limit %.5f), max oracle gap %.2e", worst_angle, kPi / 72.0, worst_oracle)};
}

Outcome ridge_dictionary() {
  const auto& dict = default_dictionary();
  std::mt19937_64 rng(90);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  int exact = 0;
  double worst = 0.0;
  for (const auto& e : dict.elements()) {
    // independent generator: gray/255 sinusoid with a random phase
    std::vector<double> patch(kDictionaryPatchPixels);
    const double ph = phase(rng);
    const double c = (kDictionaryPatchSize - 1) / 2.0;
    for (int y = 0; y < kDictionaryPatchSize; ++y) {
      for (int x = 0; x < kDictionaryPatchSize; ++x) {
        const double t = -(x - c) * std::sin(e.orientation) + (y - c) * std::cos(e.orientation);
        patch[y * kDictionaryPatchSize + x] = (127.5 + 90.0 * std::cos(kTwoPi * t / e.spacing + ph)) / 255.0;
      }
    }
    const auto got = patch_similarity(patch, dict);
    const auto& g = dict[got.best_index];
    if (g.orientation == e.orientation && g.spacing == e.spacing) {
      ++exact;
    }
    double diff = std::fmod(std::abs(g.orientation - e.orientation), kPi);
    diff = std::min(diff, kPi - diff);
    worst = std::max(worst, diff);
  }
  return {exact >= 88 && worst <= kPi / 10.0,
          fmt("%d/90 exact, worst orientation error %.4f rad", exact, worst)};
}

Outcome pq_fidelity() {
  const DescriptorGenerator gen(kCompressedDescriptorLength, 16, 41);
  const auto corpus = descriptor_corpus(gen, 10000, 42);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> eps(0.02, 0.3);
  std::vector<std::vector<float>> xs, ys;
  for (int p = 0; p < 10000; ++p) {
    auto x = gen.sample(rng);
    // half near pairs, half unrelated pairs
    auto y = p % 2 == 0 ? perturb_descriptor(x, eps(rng), rng) : gen.sample(rng);
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }
  std::vector<double> rho;
  std::string detail;
  for (std::size_t m : {12u, 16u, 24u}) {
    PqOptions o;
    o.subquantizers = m;
    o.seed = 5;
    const auto cb = train_pq(corpus, o);
    const std::size_t sd = cb.sub_dim();
    std::vector<double> exact, adc;
    for (std::size_t p = 0; p < xs.size(); ++p) {
      double e = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t k = i * sd; k < (i + 1) * sd; ++k) {
          s += (static_cast<double>(xs[p][k]) - ys[p][k]) * (static_cast<double>(xs[p][k]) - ys[p][k]);
        }
        e += std::sqrt(s);
      }
      exact.push_back(e);
      adc.push_back(adc_distance(xs[p], quantize_values(cb, ys[p]), cb));
    }
    rho.push_back(spearman(exact, adc));
    detail += fmt("m=%zu rho=%.4f ", m, rho.back());
  }
  const bool pass = rho[1] >= 0.9 && rho[2] >= rho[1] && rho[1] >= rho[0];
  return {pass, detail + "(need m=16 >= 0.9, 24 >= 16 >= 12)"};
}

Outcome compression_fidelity() {
  const auto t0 = Clock::now();
  const DescriptorGenerator gen(kRawDescriptorLength, 16, 51);
  const auto train = descriptor_corpus(gen, 12000, 52);
  CompressorTrainingReport report;
  const auto model = train_compressor(train, CompressorOptions{}, &report);
  const auto held = descriptor_corpus(gen, 2000, 53);
  std::vector<std::vector<float>> out;
  for (const auto& v : held) {
    out.push_back(model.forward(v));
  }
  std::mt19937_64 rng(54);
  std::uniform_int_distribution<std::size_t> pick(0, held.size() - 1);
  double gap = 0.0;
  const int pairs = 10000;
  for (int p = 0; p < pairs; ++p) {
    const auto a = pick(rng);
    std::size_t b = pick(rng);
    if (p % 2 == 0) {
      // near pair: best of 32 random partners, the training distribution
      double best = -2.0;
      for (int t = 0; t < 32; ++t) {
        const auto c = pick(rng);
        const double s = c == a ? -2.0 : cos_sim(held[a], held[c]);
        if (s > best) {
          best = s;
          b = c;
        }
      }
    }
    gap += std::abs(cos_sim(held[a], held[b]) - cos_sim(out[a], out[b]));
  }
  gap /= pairs;

  // nearest neighbour in input space stays within the output top 5
  const std::size_t queries = 500, pool = 1000;
  std::size_t kept = 0;
  for (std::size_t q = 0; q < queries; ++q) {
    std::size_t nn = 0;
    double nn_s = -2.0;
    std::vector<double> outs;
    for (std::size_t c = queries; c < queries + pool; ++c) {
      const double s = cos_sim(held[q], held[c]);
      if (s > nn_s) {
        nn_s = s;
        nn = c;
      }
      outs.push_back(cos_sim(out[q], out[c]));
    }
    const double target = outs[nn - queries];
    const auto better = std::count_if(outs.begin(), outs.end(), [&](double s) { return s > target; });
    if (better < 5) {
      ++kept;
    }
  }
  const double top5 = static_cast<double>(kept) / queries;
  return {gap <= 0.05 && top5 >= 0.9,
          fmt("mean |cos gap| %.4f (<= 0.05), top-1-in-top-5 %.3f (>= 0.9), loss %.4f -> %.4f, %.0f s", gap, top5,
              report.epoch_losses.front(), report.epoch_losses.back(), seconds_since(t0))};
}

// shared by the identification and parallel criteria
struct Scene {
  DescriptorGenerator gen{kCompressedDescriptorLength, 16, 61};
  SyntheticGalleryOptions options;
  std::vector<SyntheticReference> refs;
  EngineModels models;
  GalleryIndex index;
  std::vector<PreparedProbe> probes;
  std::vector<std::string> mates;
};

Scene& scene() {
  static Scene s = [] {
    Scene sc;
    std::mt19937_64 rng(62);
    PqOptions o;
    o.seed = 63;
    auto corpus = descriptor_corpus(sc.gen, 10000, 64);
    sc.models.codebook = train_pq(corpus, o);

    // d0: 95th percentile of genuine ADC distances on a separate calibration set
    std::vector<double> genuine;
    for (int c = 0; c < 20; ++c) {
      const auto ref = synthesize_reference("cal", sc.gen, sc.options, rng);
      for (const auto& d : ref.texture.descriptors) {
        const auto probe = perturb_descriptor(d.values, 0.05, rng);
        genuine.push_back(adc_distance(probe, quantize_values(sc.models.codebook, d.values), sc.models.codebook));
      }
    }
    sc.models.d0 = calibrate_d0(genuine, 0.95);

    sc.index = GalleryIndex(sc.models.codebook);
    for (int i = 0; i < 1000; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "ref%04d", i);
      sc.refs.push_back(synthesize_reference(id, sc.gen, sc.options, rng));
      ReferenceRecord rec{sc.refs.back().minutiae, sc.refs.back().texture};
      for (auto& d : rec.texture.descriptors) {
        d = quantize_descriptor(sc.models.codebook, d);
      }
      sc.index.add(id, rec);
    }
    for (int p = 0; p < 100; ++p) {
      const auto& mate = sc.refs[static_cast<std::size_t>(p) * 10 + 3];
      const auto probe = perturb_reference(mate, sc.gen, sc.options, PerturbOptions{}, rng);
      sc.probes.push_back(PreparedProbe::prepare(probe.minutiae, probe.texture, sc.models.codebook));
      sc.mates.push_back(mate.id);
    }
    return sc;
  }();
  return s;
}

Outcome identification() {
  auto& sc = scene();
  const auto t0 = Clock::now();
  SearchOptions o;
  o.d0 = sc.models.d0;
  o.workers = 1;
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(sc.probes.size()), static_cast<Eigen::Index>(sc.index.size()));
  for (std::size_t p = 0; p < sc.probes.size(); ++p) {
    const auto row = score_all(sc.probes[p], sc.index, o);
    for (std::size_t j = 0; j < row.size(); ++j) {
      scores(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = row[j].score;
    }
  }
  const double secs = seconds_since(t0);
  std::vector<std::string> ids;
  for (const auto& e : sc.index.entries()) {
    ids.push_back(e.id);
  }
  const auto curve = evaluate_cmc(scores, ids, sc.mates, 20);
  return {curve.rate(1) >= 0.95 && curve.rate(5) == 1.0 && secs < 600.0,
          fmt("%zu probes x %zu references: rank-1 %.3f, rank-5 %.3f, %.1f s single worker, d0 %.4f",
              sc.probes.size(), sc.index.size(), curve.rate(1), curve.rate(5), secs, sc.models.d0)};
}

// templates of the sizes quoted for operational data
struct PaperScaleTemplates {
  PreparedProbe probe;
  GalleryEntry entry;
};

PaperScaleTemplates paper_scale(const Scene& sc) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> pos(16.0, 1000.0), ang(0.0, kTwoPi), tex(0.0, kPi);
  auto real = [&](std::size_t n) {
    MinutiaeTemplate t;
    for (std::size_t i = 0; i < n; ++i) {
      t.minutiae.push_back({pos(rng), pos(rng), ang(rng), MinutiaKind::kReal});
      t.descriptors.push_back(Descriptor::compressed(sc.gen.sample(rng)));
    }
    return t;
  };
  auto texture = [&](std::size_t n) {
    TextureTemplate t;
    for (std::size_t i = 0; i < n; ++i) {
      t.minutiae.push_back({pos(rng), pos(rng), tex(rng), MinutiaKind::kVirtual});
      t.descriptors.push_back(Descriptor::compressed(sc.gen.sample(rng)));
    }
    return t;
  };
  const std::array<MinutiaeTemplate, 3> latent{real(100), real(100), real(100)};
  const auto latent_texture = texture(1000);
  ReferenceRecord rec{real(100), texture(1000)};
  for (auto& d : rec.texture.descriptors) {
    d = quantize_descriptor(sc.models.codebook, d);
  }
  GalleryIndex one(sc.models.codebook);
  one.add("big", rec);
  return {PreparedProbe::prepare(latent, latent_texture, sc.models.codebook), one.entries().front()};
}

Outcome parallel() {
  auto& sc = scene();
  SearchOptions o;
  o.d0 = sc.models.d0;
  bool equal = true;
  double t1 = 0.0, t8 = 0.0;
  for (std::size_t p = 0; p < 20; ++p) {
    o.workers = 1;
    auto t0 = Clock::now();
    const auto a = search_gallery(sc.probes[p], sc.index, o);
    t1 += seconds_since(t0);
    o.workers = 8;
    t0 = Clock::now();
    const auto b = search_gallery(sc.probes[p], sc.index, o);
    t8 += seconds_since(t0);
    equal = equal && a == b;
  }
  const auto big = paper_scale(sc);
  o.workers = 1;
  const int reps = 20;
  score_reference(big.probe, big.entry, o);  // warm-up
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    score_reference(big.probe, big.entry, o);
  }
  const double per_ms = 1000.0 * seconds_since(t0) / reps;
  const double speedup = t1 / t8;
  const unsigned cores = std::thread::hardware_concurrency();
  return {equal && per_ms <= 20.0 && speedup >= 5.0,
          fmt("8-worker output %s sequential; %.2f ms per paper-scale comparison (<= 20); "
              "8-worker speedup %.2fx (>= 5) on %u hardware thread(s)",
              equal ? "equals" : "DIFFERS from", per_ms, speedup, cores)};
}

Outcome cmc_oracle() {
  std::mt19937_64 rng(81);
  bool same = true;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd s(100, 1000);
    // trial 0 uses coarse scores so ties are common
    std::uniform_int_distribution<int> coarse(0, 20);
    std::normal_distribution<double> fine;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      s.data()[k] = trial == 0 ? coarse(rng) : fine(rng);
    }
    std::vector<std::string> ids(1000);
    for (int j = 0; j < 1000; ++j) {
      ids[j] = "g" + std::to_string((j * 617) % 1000);
    }
    std::vector<std::string> mates;
    for (int p = 0; p < 100; ++p) {
      mates.push_back(ids[rng() % 1000]);
    }
    const auto curve = evaluate_cmc(s, ids, mates);
    // brute force: sort every row, locate the mate, accumulate
    std::vector<double> counts(1000, 0.0);
    for (int p = 0; p < 100; ++p) {
      std::vector<std::pair<double, std::string>> row;
      for (int j = 0; j < 1000; ++j) {
        row.emplace_back(-s(p, j), ids[j]);
      }
      std::sort(row.begin(), row.end());
      const auto pos = std::find_if(row.begin(), row.end(), [&](const auto& e) { return e.second == mates[p]; }) -
                       row.begin();
      for (std::size_t k = static_cast<std::size_t>(pos); k < 1000; ++k) {
        counts[k] += 1.0;
      }
    }
    for (std::size_t k = 0; k < 1000; ++k) {
      same = same && curve.rates[k] == counts[k] / 100.0;
    }
  }
  return {same, same ? "5 random 100x1000 matrices match exactly" : "curve differs from brute force"};
}

Outcome fusion() {
  bool ok = std::abs(fuse_scores(1, 1, 1, 1) - 3.3) < 1e-12 && fuse_scores(0, 0, 0, 0) == 0.0 &&
            std::abs(fuse_scores(2, 0, 0, 0) - 2.0) < 1e-12 && std::abs(fuse_scores(0, 0, 0, 10) - 3.0) < 1e-12 &&
            std::abs(fuse_scores(0.5, 1.5, 2.5, 1.0) - 4.8) < 1e-12;
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    std::array<double, 4> s{u(rng), u(rng), u(rng), u(rng)};
    const double base = fuse_scores(s[0], s[1], s[2], s[3]);
    for (int k = 0; k < 4; ++k) {
      auto up = s;
      up[k] += u(rng);
      if (fuse_scores(up[0], up[1], up[2], up[3]) < base) {
        ++violations;
      }
    }
  }
  return {ok && violations == 0, fmt("hand cases %s, %d monotonicity violations in 1000 tuples",
                                     ok ? "hold" : "FAIL", violations)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"minutiae-map round trip", map_round_trip},
      {"quadratic orientation interpolation", quadratic_interpolation},
      {"ridge dictionary labelling", ridge_dictionary},
      {"product quantization fidelity", pq_fidelity},
      {"descriptor compression fidelity", compression_fidelity},
      {"identification on a 1000-reference gallery", identification},
      {"parallel equivalence and throughput", parallel},
      {"CMC against brute force", cmc_oracle},
      {"score fusion", fusion},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
