#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "lfs/angles.hpp"
#include "lfs/config.hpp"
#include "lfs/image.hpp"
#include "lfs/template_io.hpp"
#include "lfs/types.hpp"

using namespace lfs;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lfs_test_core_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

MinutiaeTemplate random_minutiae_template(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 40);
  std::uniform_real_distribution<double> pos(0.0, 511.0);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  std::normal_distribution<float> val(0.0f, 1.0f);
  MinutiaeTemplate t;
  t.source = std::array{TemplateSource::kReference, TemplateSource::kLatentStft, TemplateSource::kLatentEnhanced,
                        TemplateSource::kLatentCommon}[rng() % 4];
  const int n = count(rng);
  const bool raw = rng() % 2 == 0;
  for (int i = 0; i < n; ++i) {
    t.minutiae.push_back({pos(rng), pos(rng), std::min(ang(rng), std::nextafter(kTwoPi, 0.0)), MinutiaKind::kReal});
    std::vector<float> v(raw ? kRawDescriptorLength : kCompressedDescriptorLength);
    for (auto& x : v) {
      x = val(rng);
    }
    t.descriptors.push_back(raw ? Descriptor::raw(std::move(v)) : Descriptor::compressed(std::move(v)));
  }
  return t;
}

TextureTemplate random_texture_template(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(0, 60);
  std::uniform_real_distribution<double> pos(0.0, 511.0);
  std::uniform_real_distribution<double> ang(0.0, kPi);
  TextureTemplate t;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    t.minutiae.push_back({pos(rng), pos(rng), ang(rng), MinutiaKind::kVirtual});
    std::vector<std::uint8_t> codes(kDefaultSubquantizers);
    for (auto& c : codes) {
      c = static_cast<std::uint8_t>(rng() & 0xff);
    }
    t.descriptors.push_back(Descriptor::quantized(std::move(codes)));
  }
  return t;
}

}  // namespace

TEST_CASE("angle_diff on the documented cases") {
  CHECK(angle_diff(0.1, 0.1) == 0.0);
  CHECK(angle_diff(0.0, 3.0 * kPi / 2.0) == doctest::Approx(kPi / 2.0).epsilon(1e-15));
  CHECK(angle_diff(kPi / 6.0, 11.0 * kPi / 6.0) == doctest::Approx(kPi / 3.0).epsilon(1e-15));
}

TEST_CASE("angle_diff is symmetric, zero on the diagonal and bounded by pi") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    CHECK(angle_diff(a, b) == angle_diff(b, a));
    CHECK(angle_diff(a, a) == 0.0);
    CHECK(angle_diff(a, b) <= kPi);
    CHECK(angle_diff(a, b) >= 0.0);
  }
}

TEST_CASE("wrapping and lifting conventions") {
  CHECK(wrap_two_pi(-0.5) == doctest::Approx(kTwoPi - 0.5));
  CHECK(wrap_two_pi(kTwoPi) == doctest::Approx(0.0));
  CHECK(wrap_pi(kPi + 0.25) == doctest::Approx(0.25));
  CHECK(flow_to_minutia_angle(1.0) == 1.0);
  CHECK(minutia_to_flow_angle(kPi + 1.0) == doctest::Approx(1.0));
  const std::vector<double> around_zero{0.1, kTwoPi - 0.1};
  CHECK(angle_diff(circular_mean(around_zero), 0.0) < 1e-12);
  CHECK(circular_mean(std::vector<double>{}) == 0.0);
}

TEST_CASE("empty template serializes to a header-only record") {
  MinutiaeTemplate t;
  const auto bytes = serialize_template(t);
  // magic, version, kind, source, header length + 8, two zero section lengths
  CHECK(bytes.size() == 4 + 2 + 1 + 1 + 4 + 8 + 4 + 4);
  CHECK(std::memcmp(bytes.data(), "LFTP", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(deserialize_minutiae_template(bytes) == t);
}

TEST_CASE("one-minutia template round-trips and has the documented layout") {
  MinutiaeTemplate t;
  t.source = TemplateSource::kLatentCommon;
  t.minutiae.push_back({12.5, 40.25, 1.0, MinutiaKind::kReal});
  std::vector<float> v(kCompressedDescriptorLength, 0.0f);
  v[3] = 1.0f;
  t.descriptors.push_back(Descriptor::compressed(v));
  const auto bytes = serialize_template(t);
  CHECK(bytes.size() == 28 + 25 + 96 * 4);
  CHECK(bytes[6] == 0);   // minutiae template
  CHECK(bytes[7] == 6);   // set 6
  CHECK(bytes[16] == 1);  // compressed stage
  double x = 0.0;
  std::memcpy(&x, bytes.data() + 24, 8);
  CHECK(x == 12.5);
  CHECK(deserialize_minutiae_template(bytes) == t);
}

TEST_CASE("randomized template round trips are byte-identical") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_minutiae_template(rng);
    const auto mb = serialize_template(m);
    const auto m2 = deserialize_minutiae_template(mb);
    REQUIRE(m2 == m);
    REQUIRE(serialize_template(m2) == mb);

    const auto t = random_texture_template(rng);
    const auto tb = serialize_template(t);
    const auto t2 = deserialize_texture_template(tb);
    REQUIRE(t2 == t);
    REQUIRE(serialize_template(t2) == tb);
  }
}

TEST_CASE("malformed records are rejected") {
  MinutiaeTemplate t;
  t.minutiae.push_back({1, 2, 3, MinutiaKind::kReal});
  t.descriptors.push_back(Descriptor::compressed(std::vector<float>(8, 0.5f)));
  auto bytes = serialize_template(t);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_minutiae_template(truncated), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_minutiae_template(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(deserialize_minutiae_template(bad_version), FormatError);
  CHECK_THROWS_AS(deserialize_texture_template(bytes), FormatError);
}

TEST_CASE("template validation") {
  MinutiaeTemplate t;
  t.minutiae.push_back({1, 2, kTwoPi, MinutiaKind::kReal});
  t.descriptors.push_back(Descriptor::compressed({1.0f}));
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.minutiae[0].theta = 0.5;
  CHECK_NOTHROW(t.validate());
  t.descriptors.clear();
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Descriptor::raw(std::vector<float>(10, 0.0f)), std::invalid_argument);
}

TEST_CASE("reference files and manifests") {
  const auto dir = scratch_dir("ref");
  std::mt19937_64 rng(5);
  ReferenceRecord r{random_minutiae_template(rng), random_texture_template(rng)};
  r.minutiae.source = TemplateSource::kReference;
  write_reference_file(r, dir / "a.lfr");
  CHECK(read_reference_file(dir / "a.lfr") == r);

  std::vector<ManifestEntry> entries{{"a", dir / "a.lfr", dir / "a.pgm"}, {"b", dir / "b.lfr", std::nullopt}};
  write_manifest(entries, dir / "manifest.txt");
  const auto back = read_manifest(dir / "manifest.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "a");
  CHECK(std::filesystem::equivalent(back[0].template_path.parent_path(), dir));
  CHECK(back[0].image_path.has_value());
  CHECK_FALSE(back[1].image_path.has_value());
}

TEST_CASE("candidate ordering is a total order and re-sorting is a no-op") {
  std::mt19937_64 rng(9);
  std::vector<CandidateEntry> entries;
  for (int i = 0; i < 300; ++i) {
    entries.push_back({"id" + std::to_string(rng() % 1000), static_cast<double>(rng() % 7), {}, 0.0});
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.reference_id < b.reference_id; });
  entries.erase(std::unique(entries.begin(), entries.end(),
                            [](const auto& a, const auto& b) { return a.reference_id == b.reference_id; }),
                entries.end());
  const auto ranked = rank_candidates(entries, entries.size());
  for (std::size_t i = 1; i < ranked.entries.size(); ++i) {
    const auto& a = ranked.entries[i - 1];
    const auto& b = ranked.entries[i];
    CHECK((a.score > b.score || (a.score == b.score && a.reference_id < b.reference_id)));
  }
  CHECK(rank_candidates(ranked.entries, entries.size()) == ranked);
  CHECK(rank_candidates(entries, 5).entries.size() == 5);
}

TEST_CASE("graymap round trip") {
  GrayImage img(7, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      img.at(x, y) = static_cast<float>((x * 37 + y * 11) % 256);
    }
  }
  CHECK(decode_pgm(encode_pgm(img)) == img);
  const std::string ascii = "P2\n# c\n2 2\n255\n0 10\n20 255\n";
  const auto a = decode_pgm(std::vector<std::uint8_t>(ascii.begin(), ascii.end()));
  CHECK(a.at(1, 1) == 255.0f);
  CHECK(a.at(1, 0) == 10.0f);
}

TEST_CASE("config parsing") {
  const auto c = parse_config("# thresholds\nsigma_s = 2.5\nm_t=0.3\nlambda4 = 0.5  # texture\ntopk = 7\n");
  CHECK(c.encoder.sigma_s == 2.5);
  CHECK(c.m_t == 0.3);
  CHECK(c.weights.texture == 0.5);
  CHECK(c.topk == 7);
  CHECK(parse_config(format_config(c)).m_t == c.m_t);
  CHECK(parse_config(format_config(EngineConfig{})).encoder.sigma_o == EngineConfig{}.encoder.sigma_o);
  CHECK_THROWS_AS(parse_config("bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("sigma_s = abc\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("stride = 0\n"), std::invalid_argument);
}
