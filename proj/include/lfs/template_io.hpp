#pragma once

// Binary template records. Every integer and float is little-endian.
//
// Template record (format version 1):
//
//   offset  size  field
//   0       4     magic "LFTP"
//   4       2     format version (1)
//   6       1     template kind (0 = minutiae, 1 = texture)
//   7       1     source tag (TemplateSource; 0 for texture templates)
//   8       4     header section length (always 8)
//   12      4       minutia count n
//   16      1       descriptor stage (0 raw, 1 compressed, 2 quantized)
//   17      1       reserved (0)
//   18      2       descriptor length L (values or codes per descriptor)
//   20      4     minutiae section length (n * 25)
//   24      ...     n x { f64 x, f64 y, f64 theta, u8 kind }
//   ..      4     descriptor section length (n * L * 4, or n * L when quantized)
//   ..      ...     n x L x f32, or n x L x u8
//
// Reference file: magic "LFRP", u16 version (1), u16 reserved, then two
// length-prefixed (u32) template records: the minutiae template followed by
// the texture template.
//
// Gallery manifest (text, one entry per line):
//   lfs-gallery 1
//   ref <id> <template file> [<image file>]
// Paths are relative to the manifest directory unless absolute.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "lfs/types.hpp"

namespace lfs {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kTemplateFormatVersion = 1;

std::vector<std::uint8_t> serialize_template(const MinutiaeTemplate& tpl);
std::vector<std::uint8_t> serialize_template(const TextureTemplate& tpl);
MinutiaeTemplate deserialize_minutiae_template(std::span<const std::uint8_t> bytes);
TextureTemplate deserialize_texture_template(std::span<const std::uint8_t> bytes);

struct ReferenceRecord {
  MinutiaeTemplate minutiae;
  TextureTemplate texture;

  bool operator==(const ReferenceRecord&) const = default;
};

std::vector<std::uint8_t> serialize_reference(const ReferenceRecord& record);
ReferenceRecord deserialize_reference(std::span<const std::uint8_t> bytes);
void write_reference_file(const ReferenceRecord& record, const std::filesystem::path& path);
ReferenceRecord read_reference_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::filesystem::path template_path;
  std::optional<std::filesystem::path> image_path;
};

/// Resolved (absolute or manifest-relative) paths are returned.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
/// Entries are written relative to the manifest directory when possible.
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(std::span<const std::uint8_t> bytes, const std::filesystem::path& path);

/// Little-endian byte writer/reader shared by the binary formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void tag(const char (&four)[5]);
  std::size_t size() const noexcept { return bytes_.size(); }
  /// Overwrites a previously reserved u32 at `offset`.
  void patch_u32(std::size_t offset, std::uint32_t v);
  std::vector<std::uint8_t> take() && { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  double f64();
  std::span<const std::uint8_t> take(std::size_t n);
  void expect_tag(const char (&four)[5]);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace lfs
