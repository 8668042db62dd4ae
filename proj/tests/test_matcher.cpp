#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lfs/angles.hpp"
#include "lfs/matcher.hpp"
#include "lfs/synthetic.hpp"

using namespace lfs;

namespace {

std::vector<float> random_unit(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<float> g;
  std::vector<float> v(n);
  double ss = 0.0;
  for (auto& x : v) {
    x = g(rng);
    ss += static_cast<double>(x) * x;
  }
  for (auto& x : v) {
    x = static_cast<float>(x / std::sqrt(ss));
  }
  return v;
}

MinutiaeTemplate random_template(std::mt19937_64& rng, std::size_t n, double size = 400.0) {
  std::uniform_real_distribution<double> pos(50.0, 50.0 + size), ang(0.0, kTwoPi);
  MinutiaeTemplate t;
  while (t.size() < n) {
    const Minutia m{pos(rng), pos(rng), ang(rng), MinutiaKind::kReal};
    if (std::all_of(t.minutiae.begin(), t.minutiae.end(),
                    [&](const Minutia& q) { return std::hypot(q.x - m.x, q.y - m.y) >= 20.0; })) {
      t.minutiae.push_back(m);
      t.descriptors.push_back(Descriptor::compressed(random_unit(rng, kCompressedDescriptorLength)));
    }
  }
  return t;
}

Minutia rigid(const Minutia& m, double angle, double tx, double ty) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * m.x - s * m.y + tx, s * m.x + c * m.y + ty, wrap_two_pi(m.theta + angle), m.kind};
}

MinutiaeTemplate transformed(const MinutiaeTemplate& t, double angle, double tx, double ty) {
  auto out = t;
  for (auto& m : out.minutiae) {
    m = rigid(m, angle, tx, ty);
  }
  return out;
}

// selection oracle: full sort of every positive entry by (value desc, i, j)
std::vector<Correspondence> oracle_select(const SimilarityMatrix& s, std::size_t n) {
  std::vector<Correspondence> all;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (s(i, j) > 0.0) {
        all.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), s(i, j)});
      }
    }
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.similarity != b.similarity) {
      return a.similarity > b.similarity;
    }
    return std::pair(a.latent_index, a.reference_index) < std::pair(b.latent_index, b.reference_index);
  });
  all.resize(std::min(n, all.size()));
  return all;
}

bool one_to_one(const std::vector<Correspondence>& cs) {
  std::set<std::size_t> l, r;
  for (const auto& c : cs) {
    if (!l.insert(c.latent_index).second || !r.insert(c.reference_index).second) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("similarity matrix matches a scalar loop") {
  std::mt19937_64 rng(1);
  const auto a = random_template(rng, 13);
  const auto b = random_template(rng, 17);
  const auto s = similarity_matrix(a, b);
  REQUIRE(s.rows() == 13);
  REQUIRE(s.cols() == 17);
  for (int i = 0; i < 13; ++i) {
    for (int j = 0; j < 17; ++j) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t k = 0; k < kCompressedDescriptorLength; ++k) {
        const double x = a.descriptors[i].values[k], y = b.descriptors[j].values[k];
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      CHECK(s(i, j) == doctest::Approx(std::max(0.0, dot / std::sqrt(na * nb))).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("normalization on small matrices") {
  SimilarityMatrix s(2, 2);
  s << 1.0, 0.0, 0.0, 1.0;
  const auto n = normalize_similarity(s, 0.0);
  CHECK(n(0, 0) == doctest::Approx(1.0));
  CHECK(n(0, 1) == 0.0);

  s << 0.5, 0.5, 0.5, 0.5;
  const auto m = normalize_similarity(s, 0.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(m.data()[i] == doctest::Approx(0.5 / 1.5));
  }
  const SimilarityMatrix z = SimilarityMatrix::Zero(3, 2);
  CHECK(normalize_similarity(z).isZero(0.0));
}

TEST_CASE("top-N selection equals a full sort") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.2, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    SimilarityMatrix s(20 + trial % 7, 30);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      // coarse values force ties
      s.data()[k] = std::max(0.0, std::round(u(rng) * 10.0) / 10.0);
    }
    for (std::size_t n : {1u, 7u, 120u, 10000u}) {
      CHECK(select_top_correspondences(s, n, SelectionMode::kMinutiae, s) == oracle_select(s, n));
    }
  }
}

TEST_CASE("texture selection keeps the two best columns per row") {
  SimilarityMatrix raw(2, 4);
  raw << 0.1, 0.9, 0.8, 0.7,  //
      0.0, 0.0, 0.3, 0.0;
  SimilarityMatrix ranked = raw;
  ranked(0, 2) = 5.0;
  const auto sel = select_top_correspondences(ranked, 10, SelectionMode::kTexture, raw, 2);
  REQUIRE(sel.size() == 3);
  CHECK(sel[0] == Correspondence{0, 2, 5.0});
  CHECK(sel[1] == Correspondence{0, 1, 0.9});
  CHECK(sel[2] == Correspondence{1, 2, 0.3});
  CHECK(select_top_correspondences(ranked, 1, SelectionMode::kTexture, raw, 2).size() == 1);
}

TEST_CASE("a template matched against itself keeps every minutia") {
  std::mt19937_64 rng(3);
  const auto t = random_template(rng, 20);
  const auto r = compare_minutiae_templates(t, t);
  CHECK(r.surviving.size() == 20);
  CHECK(one_to_one(r.surviving));
  for (const auto& c : r.surviving) {
    CHECK(c.latent_index == c.reference_index);
  }
  CHECK(r.score > 0.0);
}

TEST_CASE("a planted rigid transform is recovered") {
  std::mt19937_64 rng(4);
  const auto ref = random_template(rng, 40);
  // latent: a rotated, shifted subset plus unrelated clutter
  MinutiaeTemplate lat;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < ref.size(); i += 2) {
    lat.minutiae.push_back(rigid(ref.minutiae[i], 0.4, 30.0, -20.0));
    std::mt19937_64 noise(i);
    lat.descriptors.push_back(Descriptor::compressed(perturb_descriptor(ref.descriptors[i].values, 0.05, noise)));
    truth.push_back(i);
  }
  const auto clutter = random_template(rng, 10);
  for (std::size_t k = 0; k < clutter.size(); ++k) {
    lat.minutiae.push_back(clutter.minutiae[k]);
    lat.descriptors.push_back(clutter.descriptors[k]);
  }
  const auto r = compare_minutiae_templates(lat, ref);
  CHECK(one_to_one(r.surviving));
  std::size_t correct = 0;
  for (const auto& c : r.surviving) {
    if (c.latent_index < truth.size() && truth[c.latent_index] == c.reference_index) {
      ++correct;
    }
  }
  CHECK(correct >= 18);
  CHECK(correct + 2 >= r.surviving.size());

  const auto impostor = random_template(rng, 40);
  CHECK(compare_minutiae_templates(lat, impostor).score < 0.25 * r.score);
}

TEST_CASE("scores are invariant to a rigid transform of either template") {
  std::mt19937_64 rng(5);
  const auto a = random_template(rng, 25);
  auto b = transformed(a, 0.0, 0.0, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.descriptors[i] = Descriptor::compressed(perturb_descriptor(a.descriptors[i].values, 0.1, rng));
  }
  const double base = compare_minutiae_templates(a, b).score;
  CHECK(base > 0.0);
  for (double angle : {0.3, 1.7, 4.0}) {
    const double moved = compare_minutiae_templates(transformed(a, angle, 100.0, -40.0), b).score;
    CHECK(moved == doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("compatibility is symmetric under swapping the templates") {
  std::mt19937_64 rng(6);
  const auto a = random_template(rng, 10);
  const auto b = random_template(rng, 10);
  for (std::size_t k = 0; k < 50; ++k) {
    const Correspondence p{rng() % 10, rng() % 10, 1.0}, q{rng() % 10, rng() % 10, 1.0};
    const double c = compatibility(p, q, a.minutiae, b.minutiae);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    const Correspondence ps{p.reference_index, p.latent_index, 1.0}, qs{q.reference_index, q.latent_index, 1.0};
    CHECK(compatibility(ps, qs, b.minutiae, a.minutiae) == doctest::Approx(c).epsilon(1e-12));
    CHECK(compatibility(q, p, a.minutiae, b.minutiae) == doctest::Approx(c).epsilon(1e-12));
  }
  const Correspondence p{1, 2, 1.0}, shared{1, 3, 1.0};
  CHECK(compatibility(p, shared, a.minutiae, b.minutiae) == 0.0);
  CHECK(compatibility(p, p, a.minutiae, a.minutiae) == 0.0);
  const Correspondence x{1, 1, 1.0}, y{2, 2, 1.0};
  CHECK(compatibility(x, y, a.minutiae, a.minutiae) == doctest::Approx(1.0));
}

TEST_CASE("graph stages on degenerate inputs") {
  std::mt19937_64 rng(7);
  const auto a = random_template(rng, 5);
  CHECK(second_order_match({}, a.minutiae, a.minutiae, GraphStage::kFull).score == 0.0);
  const std::vector<Correspondence> one{{2, 3, 0.4}};
  const auto r = second_order_match(one, a.minutiae, a.minutiae, GraphStage::kFull);
  REQUIRE(r.surviving.size() == 1);
  CHECK(r.score == doctest::Approx(0.4));
  // all candidates share latent minutia 0: no pairwise structure, best single one
  const std::vector<Correspondence> star{{0, 1, 0.2}, {0, 2, 0.7}, {0, 3, 0.5}};
  const auto s = second_order_match(star, a.minutiae, a.minutiae, GraphStage::kFull);
  REQUIRE(s.surviving.size() == 1);
  CHECK(s.surviving[0].reference_index == 2);
  const std::vector<Correspondence> bad{{9, 0, 1.0}, {0, 1, 1.0}};
  CHECK_THROWS_AS(second_order_match(bad, a.minutiae, a.minutiae, GraphStage::kFull), std::invalid_argument);
}

TEST_CASE("survivors are one-to-one for random templates") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_template(rng, 30);
    const auto b = random_template(rng, 35);
    const auto r = compare_minutiae_templates(a, b);
    CHECK(one_to_one(r.surviving));
    CHECK(r.score >= 0.0);
    CHECK(r.selected.size() <= 120);
  }
}

TEST_CASE("texture templates: self match, prepared path and direct path agree") {
  const DescriptorGenerator gen(kCompressedDescriptorLength, 12, 3);
  const auto corpus = descriptor_corpus(gen, 2000, 4);
  PqOptions o;
  o.max_iterations = 8;
  const auto cb = train_pq(corpus, o);

  SyntheticGalleryOptions go;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto ref = synthesize_reference("r", gen, go, rng);
    TextureTemplate qref = ref.texture;
    for (auto& d : qref.descriptors) {
      d = quantize_descriptor(cb, d);
    }
    // latent holding the reconstructed centroids: every diagonal distance is 0
    TextureTemplate self = qref;
    for (auto& d : self.descriptors) {
      d = Descriptor::compressed(reconstruct(cb, d.codes));
    }
    const double d0 = 1.0;
    const auto direct = compare_texture_templates(self, qref, cb, d0);
    // 200 selected, halved by the simplified stage
    CHECK(direct.surviving.size() >= 90);
    for (const auto& c : direct.surviving) {
      CHECK(c.latent_index == c.reference_index);
    }

    const auto probe = perturb_reference(ref, gen, go, PerturbOptions{}, rng);
    const auto lhs = compare_texture_templates(probe.texture, qref, cb, d0);
    const auto rhs = compare_texture_prepared(PreparedTextureProbe::prepare(probe.texture, cb),
                                              PackedTextureReference::pack(qref), d0);
    CHECK(lhs.score == rhs.score);
    CHECK(lhs.surviving == rhs.surviving);
    CHECK(lhs.selected == rhs.selected);
  }
}

TEST_CASE("packed and direct minutiae comparison are identical") {
  std::mt19937_64 rng(10);
  const auto a = random_template(rng, 30);
  const auto b = random_template(rng, 30);
  const auto lhs = compare_minutiae_templates(a, b);
  const auto rhs = compare_packed_minutiae(PackedMinutiae::pack(a), PackedMinutiae::pack(b));
  CHECK(lhs.score == rhs.score);
  CHECK(lhs.surviving == rhs.surviving);
  CHECK(compare_minutiae_templates(MinutiaeTemplate{}, b).score == 0.0);
}

TEST_CASE("score fusion") {
  CHECK(fuse_scores(1, 1, 1, 1) == doctest::Approx(3.3));
  CHECK(fuse_scores(0, 0, 0, 0) == 0.0);
  const FusionWeights w{0.5, 2.0, 1.0, 0.0};
  CHECK(fuse_scores(1, 1, 1, 10, w) == doctest::Approx(3.5));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 5);
  for (int i = 0; i < 200; ++i) {
    const double s1 = u(rng), s2 = u(rng), s3 = u(rng), st = u(rng), bump = u(rng);
    const double base = fuse_scores(s1, s2, s3, st);
    CHECK(fuse_scores(s1 + bump, s2, s3, st) >= base);
    CHECK(fuse_scores(s1, s2 + bump, s3, st) >= base);
    CHECK(fuse_scores(s1, s2, s3 + bump, st) >= base);
    CHECK(fuse_scores(s1, s2, s3, st + bump) >= base);
  }
}
