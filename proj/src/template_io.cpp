#include "lfs/template_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace lfs {

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v & 0xFF));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  u32(static_cast<std::uint32_t>(bits & 0xFFFFFFFFu));
  u32(static_cast<std::uint32_t>(bits >> 32));
}

void ByteWriter::tag(const char (&four)[5]) {
  for (int i = 0; i < 4; ++i) {
    u8(static_cast<std::uint8_t>(four[i]));
  }
}

void ByteWriter::patch_u32(std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    bytes_.at(offset + i) = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
  }
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    throw FormatError("unexpected end of record");
  }
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint16_t ByteReader::u16() {
  const auto s = take(2);
  return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
}

std::uint32_t ByteReader::u32() {
  const auto s = take(4);
  return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
         (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() {
  const std::uint64_t lo = u32();
  const std::uint64_t hi = u32();
  return std::bit_cast<double>(lo | (hi << 32));
}

void ByteReader::expect_tag(const char (&four)[5]) {
  const auto s = take(4);
  for (int i = 0; i < 4; ++i) {
    if (s[i] != static_cast<std::uint8_t>(four[i])) {
      throw FormatError(std::string("bad magic, expected ") + four);
    }
  }
}

namespace {

constexpr std::uint8_t kKindMinutiae = 0;
constexpr std::uint8_t kKindTexture = 1;
constexpr std::size_t kMinutiaRecordSize = 25;

std::vector<std::uint8_t> serialize_record(std::uint8_t kind, std::uint8_t source,
                                           const std::vector<Minutia>& minutiae,
                                           const std::vector<Descriptor>& descriptors) {
  const auto n = static_cast<std::uint32_t>(minutiae.size());
  const auto stage = descriptors.empty() ? DescriptorStage::kRaw : descriptors.front().stage;
  const auto length = descriptors.empty() ? std::size_t{0} : descriptors.front().size();
  if (length > 0xFFFF) {
    throw std::invalid_argument("descriptor too long for the template format");
  }

  ByteWriter w;
  w.tag("LFTP");
  w.u16(kTemplateFormatVersion);
  w.u8(kind);
  w.u8(source);

  w.u32(8);
  w.u32(n);
  w.u8(static_cast<std::uint8_t>(stage));
  w.u8(0);
  w.u16(static_cast<std::uint16_t>(length));

  w.u32(static_cast<std::uint32_t>(n * kMinutiaRecordSize));
  for (const auto& m : minutiae) {
    w.f64(m.x);
    w.f64(m.y);
    w.f64(m.theta);
    w.u8(static_cast<std::uint8_t>(m.kind));
  }

  const bool quantized = stage == DescriptorStage::kQuantized;
  w.u32(static_cast<std::uint32_t>(n * length * (quantized ? 1 : 4)));
  for (const auto& d : descriptors) {
    if (quantized) {
      w.raw(d.codes);
    } else {
      for (float v : d.values) {
        w.f32(v);
      }
    }
  }
  return std::move(w).take();
}

struct ParsedRecord {
  std::uint8_t kind = 0;
  std::uint8_t source = 0;
  std::vector<Minutia> minutiae;
  std::vector<Descriptor> descriptors;
};

ParsedRecord parse_record(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_tag("LFTP");
  if (const auto version = r.u16(); version != kTemplateFormatVersion) {
    throw FormatError("unsupported template format version " + std::to_string(version));
  }
  ParsedRecord rec;
  rec.kind = r.u8();
  rec.source = r.u8();
  if (rec.kind != kKindMinutiae && rec.kind != kKindTexture) {
    throw FormatError("unknown template kind");
  }

  if (r.u32() != 8) {
    throw FormatError("bad header section length");
  }
  const std::uint32_t n = r.u32();
  const std::uint8_t stage_byte = r.u8();
  r.u8();
  const std::size_t length = r.u16();
  if (stage_byte > 2) {
    throw FormatError("unknown descriptor stage");
  }
  const auto stage = static_cast<DescriptorStage>(stage_byte);

  if (r.u32() != static_cast<std::uint64_t>(n) * kMinutiaRecordSize) {
    throw FormatError("minutiae section length mismatch");
  }
  rec.minutiae.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Minutia m;
    m.x = r.f64();
    m.y = r.f64();
    m.theta = r.f64();
    const auto kind = r.u8();
    if (kind > 1) {
      throw FormatError("unknown minutia kind");
    }
    m.kind = static_cast<MinutiaKind>(kind);
    rec.minutiae.push_back(m);
  }

  const bool quantized = stage == DescriptorStage::kQuantized;
  if (r.u32() != static_cast<std::uint64_t>(n) * length * (quantized ? 1 : 4)) {
    throw FormatError("descriptor section length mismatch");
  }
  if (n > 0 && length == 0) {
    throw FormatError("zero-length descriptors");
  }
  rec.descriptors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (quantized) {
      const auto s = r.take(length);
      rec.descriptors.push_back(Descriptor::quantized({s.begin(), s.end()}));
    } else {
      std::vector<float> values(length);
      for (auto& v : values) {
        v = r.f32();
      }
      rec.descriptors.push_back(stage == DescriptorStage::kRaw ? Descriptor::raw(std::move(values))
                                                               : Descriptor::compressed(std::move(values)));
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after template record");
  }
  return rec;
}

std::span<const std::uint8_t> read_section(ByteReader& r) {
  const auto len = r.u32();
  return r.take(len);
}

}  // namespace

std::vector<std::uint8_t> serialize_template(const MinutiaeTemplate& tpl) {
  tpl.validate();
  return serialize_record(kKindMinutiae, static_cast<std::uint8_t>(tpl.source), tpl.minutiae, tpl.descriptors);
}

std::vector<std::uint8_t> serialize_template(const TextureTemplate& tpl) {
  tpl.validate();
  return serialize_record(kKindTexture, 0, tpl.minutiae, tpl.descriptors);
}

MinutiaeTemplate deserialize_minutiae_template(std::span<const std::uint8_t> bytes) {
  auto rec = parse_record(bytes);
  if (rec.kind != kKindMinutiae) {
    throw FormatError("record is not a minutiae template");
  }
  MinutiaeTemplate tpl{std::move(rec.minutiae), std::move(rec.descriptors),
                       static_cast<TemplateSource>(rec.source)};
  try {
    tpl.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return tpl;
}

TextureTemplate deserialize_texture_template(std::span<const std::uint8_t> bytes) {
  auto rec = parse_record(bytes);
  if (rec.kind != kKindTexture) {
    throw FormatError("record is not a texture template");
  }
  TextureTemplate tpl{std::move(rec.minutiae), std::move(rec.descriptors)};
  try {
    tpl.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return tpl;
}

std::vector<std::uint8_t> serialize_reference(const ReferenceRecord& record) {
  const auto m = serialize_template(record.minutiae);
  const auto t = serialize_template(record.texture);
  ByteWriter w;
  w.tag("LFRP");
  w.u16(kTemplateFormatVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(m.size()));
  w.raw(m);
  w.u32(static_cast<std::uint32_t>(t.size()));
  w.raw(t);
  return std::move(w).take();
}

ReferenceRecord deserialize_reference(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_tag("LFRP");
  if (const auto version = r.u16(); version != kTemplateFormatVersion) {
    throw FormatError("unsupported reference format version " + std::to_string(version));
  }
  r.u16();
  ReferenceRecord rec;
  rec.minutiae = deserialize_minutiae_template(read_section(r));
  rec.texture = deserialize_texture_template(read_section(r));
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after reference record");
  }
  return rec;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(std::span<const std::uint8_t> bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

void write_reference_file(const ReferenceRecord& record, const std::filesystem::path& path) {
  write_binary_file(serialize_reference(record), path);
}

ReferenceRecord read_reference_file(const std::filesystem::path& path) {
  return deserialize_reference(read_binary_file(path));
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open manifest " + path.string());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::string line;
  if (!std::getline(in, line) || line.rfind("lfs-gallery 1", 0) != 0) {
    throw FormatError("manifest must start with 'lfs-gallery 1'");
  }
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream ls(line);
    std::string keyword, id, tpl, image;
    ls >> keyword >> id >> tpl;
    if (keyword != "ref" || id.empty() || tpl.empty()) {
      throw FormatError("malformed manifest line " + std::to_string(line_no));
    }
    ManifestEntry e{id, resolve(tpl), std::nullopt};
    if (ls >> image) {
      e.image_path = resolve(image);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  auto relative = [&](const std::filesystem::path& p) {
    std::error_code ec;
    auto rel = std::filesystem::relative(p, base, ec);
    return (ec || rel.empty()) ? p.string() : rel.string();
  };
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write manifest " + path.string());
  }
  out << "lfs-gallery 1\n";
  for (const auto& e : entries) {
    if (e.id.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("reference id contains whitespace: " + e.id);
    }
    out << "ref " << e.id << ' ' << relative(e.template_path);
    if (e.image_path) {
      out << ' ' << relative(*e.image_path);
    }
    out << '\n';
  }
}

}  // namespace lfs
