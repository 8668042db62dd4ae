#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "lfs/cmc.hpp"
#include "lfs/gallery.hpp"
#include "lfs/search.hpp"
#include "lfs/synthetic.hpp"
#include "lfs/template_builder.hpp"

using namespace lfs;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("lfs_test_search_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RidgeFields uniform_fields(int w, int h, bool roi) {
  auto f = RidgeFields::allocate(w, h);
  std::fill(f.orientation.begin(), f.orientation.end(), 0.5);
  std::fill(f.spacing.begin(), f.spacing.end(), 9.0);
  std::fill(f.quality.begin(), f.quality.end(), 1.0);
  std::fill(f.roi.begin(), f.roi.end(), roi ? 1 : 0);
  return f;
}

// Cheap models: untrained compressor, small codebook.
const EngineModels& test_models() {
  static const EngineModels models = [] {
    EngineModels m;
    m.compressor = CompressorModel(kRawDescriptorLength, kCompressedDescriptorLength, 3);
    const DescriptorGenerator gen(kCompressedDescriptorLength, 12, 5);
    PqOptions o;
    o.max_iterations = 5;
    m.codebook = train_pq(descriptor_corpus(gen, 1500, 6), o);
    m.d0 = 1.0;
    return m;
  }();
  return models;
}

struct SyntheticGallery {
  DescriptorGenerator gen{kCompressedDescriptorLength, 12, 5};
  std::vector<SyntheticReference> refs;
  GalleryIndex index{test_models().codebook};
};

ReferenceRecord quantized_record(const SyntheticReference& ref, const PqCodebook& cb) {
  ReferenceRecord r{ref.minutiae, ref.texture};
  for (auto& d : r.texture.descriptors) {
    d = quantize_descriptor(cb, d);
  }
  return r;
}

SyntheticGallery make_gallery(std::size_t n, std::uint64_t seed) {
  SyntheticGallery g;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    g.refs.push_back(synthesize_reference("g" + std::to_string(1000 + i), g.gen, SyntheticGalleryOptions{}, rng));
    g.index.add(g.refs.back().id, quantized_record(g.refs.back(), g.index.codebook()));
  }
  return g;
}

PreparedProbe probe_for(const SyntheticGallery& g, std::size_t mate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto p = perturb_reference(g.refs[mate], g.gen, SyntheticGalleryOptions{}, PerturbOptions{}, rng);
  return PreparedProbe::prepare(p.minutiae, p.texture, g.index.codebook());
}

PrintOptions small_print(std::uint64_t seed) {
  PrintOptions po;
  po.width = 320;
  po.height = 320;
  po.minutiae = 10;
  po.seed = seed;
  return po;
}

}  // namespace

TEST_CASE("virtual minutiae lattice") {
  const auto full = extract_virtual_minutiae(uniform_fields(512, 512, true));
  CHECK(full.size() == 225);
  for (const auto& m : full) {
    CHECK(m.kind == MinutiaKind::kVirtual);
    CHECK(m.theta == doctest::Approx(0.5));
    CHECK(static_cast<int>(m.x) % 32 == 0);
    CHECK(m.x >= 16);
    CHECK(m.x + 16 < 512);
  }
  CHECK(extract_virtual_minutiae(uniform_fields(512, 512, false)).empty());

  // shrinking the ROI never adds points
  auto f = uniform_fields(512, 512, true);
  std::size_t last = full.size();
  std::mt19937_64 rng(1);
  for (int round = 0; round < 20; ++round) {
    for (int k = 0; k < 40; ++k) {
      f.roi[rng() % f.roi.size()] = 0;
    }
    const auto n = extract_virtual_minutiae(f).size();
    CHECK(n <= last);
    last = n;
  }
  CHECK(extract_virtual_minutiae(uniform_fields(512, 512, true), {64, 16}).size() == 49);
}

TEST_CASE("latent template builder") {
  const auto& models = test_models();
  CHECK_THROWS_AS(build_latent_templates(GrayImage{}, EngineConfig{}, models.compressor), std::invalid_argument);
  CHECK_THROWS_AS(build_latent_templates(GrayImage(64, 64, 1.0f), EngineConfig{}, CompressorModel{}),
                  std::invalid_argument);

  const auto blank = build_latent_templates(GrayImage(256, 256, 200.0f), EngineConfig{}, models.compressor);
  for (const auto& t : blank.minutiae) {
    CHECK(t.empty());
  }
  CHECK(blank.texture.empty());

  const auto print = synthesize_print(small_print(2));
  const auto latent = make_latent(print.image, 3);
  const auto a = build_latent_templates(latent, EngineConfig{}, models.compressor);
  CHECK(a.minutiae[0].source == TemplateSource::kLatentStft);
  CHECK(a.minutiae[1].source == TemplateSource::kLatentEnhanced);
  CHECK(a.minutiae[2].source == TemplateSource::kLatentCommon);
  CHECK(a.processed[0].tag == PipelineTag::kStft);
  CHECK(a.processed[2].tag == PipelineTag::kDecomposed);
  CHECK_FALSE(a.texture.empty());
  for (const auto& t : a.minutiae) {
    CHECK_NOTHROW(t.validate());
    for (const auto& d : t.descriptors) {
      CHECK(d.stage == DescriptorStage::kCompressed);
    }
  }
  for (const auto& d : a.texture.descriptors) {
    CHECK(d.stage == DescriptorStage::kCompressed);
  }
  CHECK(a.minutiae[0].minutiae == a.sets[0]);
  CHECK(a.minutiae[1].minutiae == a.sets[2]);

  const auto b = build_latent_templates(latent, EngineConfig{}, models.compressor);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(serialize_template(a.minutiae[k]) == serialize_template(b.minutiae[k]));
  }
  CHECK(serialize_template(a.texture) == serialize_template(b.texture));
}

TEST_CASE("reference template builder") {
  const auto& models = test_models();
  const auto print = synthesize_print(small_print(4));
  const auto ref = build_reference_template(print.image, EngineConfig{}, models);
  CHECK(ref.record.minutiae.source == TemplateSource::kReference);
  CHECK_FALSE(ref.record.minutiae.empty());
  CHECK_FALSE(ref.record.texture.empty());
  for (const auto& d : ref.record.texture.descriptors) {
    REQUIRE(d.stage == DescriptorStage::kQuantized);
    CHECK(d.codes.size() == models.codebook.subquantizers());
  }
  CHECK(build_reference_template(print.image, EngineConfig{}, models).record == ref.record);
}

TEST_CASE("a print searched against a gallery containing it ranks first") {
  const auto& models = test_models();
  GalleryIndex index(models.codebook);
  std::vector<GrayImage> images;
  for (std::uint64_t s = 10; s < 14; ++s) {
    images.push_back(synthesize_print(small_print(s)).image);
    index.add("p" + std::to_string(s), build_reference_template(images.back(), EngineConfig{}, models).record);
  }
  const auto lat = build_latent_templates(images[2], EngineConfig{}, models.compressor);
  const auto probe = PreparedProbe::prepare(lat.minutiae, lat.texture, index.codebook());
  const auto list = search_gallery(probe, index, search_options(EngineConfig{}, models.d0));
  REQUIRE(list.entries.size() == 4);
  CHECK(list.entries[0].reference_id == "p12");
}

TEST_CASE("search results do not depend on gallery order or worker count") {
  auto g = make_gallery(60, 21);
  const auto probe = probe_for(g, 17, 5);
  SearchOptions o;
  o.topk = 10;
  const auto base = search_gallery(probe, g.index, o);
  REQUIRE(base.entries.size() == 10);
  CHECK(base.entries[0].reference_id == g.refs[17].id);

  GalleryIndex shuffled(g.index.codebook());
  std::vector<std::size_t> order(g.refs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  for (auto i : order) {
    shuffled.add(g.refs[i].id, quantized_record(g.refs[i], g.index.codebook()));
  }
  CHECK(search_gallery(probe, shuffled, o) == base);

  for (std::size_t w : {2u, 3u, 8u, 64u, 100u}) {
    o.workers = w;
    CHECK(search_gallery(probe, g.index, o) == base);
  }
  o.workers = 1;
  o.topk = 1000;
  CHECK(search_gallery(probe, g.index, o).entries.size() == 60);

  // score_all is in gallery order and agrees with the ranked list
  o.workers = 4;
  const auto all = score_all(probe, g.index, o);
  REQUIRE(all.size() == 60);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].reference_id == g.index.entries()[i].id);
    CHECK(all[i] == score_reference(probe, g.index.entries()[i], o));
  }
  CHECK(rank_candidates(all, 10) == base);
}

TEST_CASE("candidate detail matches the fused score") {
  auto g = make_gallery(3, 4);
  const auto probe = probe_for(g, 1, 9);
  const SearchOptions o;
  const auto d = explain_candidate(probe, g.index.entries()[1], o);
  CHECK(d.entry.score == doctest::Approx(fuse_scores(d.minutiae[0].score, d.minutiae[1].score,
                                                     d.minutiae[2].score, d.texture.score, o.weights)));
  CHECK(d.entry.texture_score == d.texture.score);
}

TEST_CASE("gallery rejects duplicates and foreign codes") {
  auto g = make_gallery(2, 8);
  CHECK_THROWS_AS(g.index.add(g.refs[0].id, quantized_record(g.refs[0], g.index.codebook())), std::invalid_argument);
  auto rec = quantized_record(g.refs[1], g.index.codebook());
  rec.texture.descriptors[0].codes.pop_back();
  CHECK_THROWS_AS(g.index.add("other", rec), std::invalid_argument);
  CHECK(g.index.find(g.refs[1].id) != nullptr);
  CHECK(g.index.find("missing") == nullptr);
}

TEST_CASE("mate ranks agree with a brute-force oracle") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> score(0, 9);  // coarse scores force ties
  const int probes = 40, gallery = 30;
  std::vector<std::string> ids;
  for (int j = 0; j < gallery; ++j) {
    ids.push_back("id" + std::to_string((j * 7) % gallery + 100));
  }
  Eigen::MatrixXd s(probes, gallery);
  std::vector<std::string> mates;
  for (int p = 0; p < probes; ++p) {
    for (int j = 0; j < gallery; ++j) {
      s(p, j) = score(rng);
    }
    mates.push_back(ids[rng() % gallery]);
  }
  const auto ranks = mate_ranks(s, ids, mates);
  for (int p = 0; p < probes; ++p) {
    // oracle: position of the mate after sorting the row by (score desc, id asc)
    std::vector<std::pair<double, std::string>> row;
    for (int j = 0; j < gallery; ++j) {
      row.emplace_back(-s(p, j), ids[j]);
    }
    std::sort(row.begin(), row.end());
    const auto it = std::find_if(row.begin(), row.end(), [&](const auto& e) { return e.second == mates[p]; });
    CHECK(ranks[p] == static_cast<std::size_t>(it - row.begin()) + 1);
  }
  const auto curve = evaluate_cmc(s, ids, mates);
  REQUIRE(curve.max_rank() == static_cast<std::size_t>(gallery));
  CHECK(curve.rate(gallery) == 1.0);
  for (std::size_t k = 2; k <= curve.max_rank(); ++k) {
    CHECK(curve.rate(k) >= curve.rate(k - 1));
  }
  const auto r1 = std::count(ranks.begin(), ranks.end(), std::size_t{1});
  CHECK(curve.rate(1) == doctest::Approx(static_cast<double>(r1) / probes));

  std::vector<std::string> bad = mates;
  bad[3] = "nobody";
  CHECK_THROWS_AS(mate_ranks(s, ids, bad), std::invalid_argument);
  CHECK_THROWS_AS(mate_ranks(s.leftCols(5), ids, mates), std::invalid_argument);
}

TEST_CASE("CMC text output") {
  const std::vector<std::size_t> ranks{1, 2, 2, 5};
  const auto c = cmc_from_ranks(ranks, 3);
  REQUIRE(c.max_rank() == 3);
  CHECK(c.rate(1) == 0.25);
  CHECK(c.rate(2) == 0.75);
  CHECK(c.rate(3) == 0.75);
  CHECK(format_cmc_csv(c) == "rank,rate\n1,0.25\n2,0.75\n3,0.75\n");
  const auto dir = scratch_dir("cmc");
  write_cmc_csv(c, dir / "c.csv");
  std::ifstream in(dir / "c.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "rank,rate");
}

TEST_CASE("models and enrolled galleries round-trip through disk") {
  const auto& models = test_models();
  const auto dir = scratch_dir("models");
  save_models(models, dir / "m");
  CHECK(load_models(dir / "m") == models);
  std::ofstream(dir / "m" / "model.cfg") << "d0 = 0\n";
  CHECK_THROWS(load_models(dir / "m"));

  fs::create_directories(dir / "refs");
  for (std::uint64_t s = 30; s < 32; ++s) {
    write_pgm(synthesize_print(small_print(s)).image, dir / "refs" / ("r" + std::to_string(s) + ".pgm"));
  }
  std::ofstream(dir / "refs" / "broken.pgm") << "not an image";
  const auto report = enroll_directory(dir / "refs", dir / "gallery", EngineConfig{}, models);
  CHECK(report.enrolled == 2);
  CHECK(report.failures.size() == 1);
  const auto index = load_gallery(dir / "gallery" / "manifest.txt", models.codebook);
  REQUIRE(index.size() == 2);
  CHECK(index.entries()[0].id == "r30");
  REQUIRE(index.entries()[0].image_path.has_value());
  CHECK(fs::exists(*index.entries()[0].image_path));
  const auto direct = build_reference_template(read_pgm(dir / "refs" / "r30.pgm"), EngineConfig{}, models);
  CHECK(index.entries()[0].minutiae.minutiae == direct.record.minutiae.minutiae);
}
