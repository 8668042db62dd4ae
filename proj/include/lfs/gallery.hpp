#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfs/config.hpp"
#include "lfs/matcher.hpp"
#include "lfs/product_quantizer.hpp"
#include "lfs/template_io.hpp"

namespace lfs {

struct GalleryEntry {
  std::string id;
  PackedMinutiae minutiae;
  PackedTextureReference texture;
  std::optional<std::filesystem::path> image_path;
};

/// In-memory reference set. Read-only once built; ids are unique and every
/// texture template carries one code per subquantizer of `codebook()`.
class GalleryIndex {
 public:
  GalleryIndex() = default;
  explicit GalleryIndex(PqCodebook codebook) : codebook_(std::move(codebook)) {}

  /// Throws std::invalid_argument on a duplicate id or a texture template
  /// that does not fit the codebook.
  void add(const std::string& id, const ReferenceRecord& record,
           std::optional<std::filesystem::path> image_path = std::nullopt);

  const std::vector<GalleryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const GalleryEntry* find(const std::string& id) const;
  const PqCodebook& codebook() const noexcept { return codebook_; }

 private:
  PqCodebook codebook_;
  std::vector<GalleryEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
};

GalleryIndex load_gallery(const std::filesystem::path& manifest, const PqCodebook& codebook);

struct EnrollmentReport {
  std::size_t enrolled = 0;
  std::vector<std::string> failures;  // "<file>: <reason>"
};

struct EngineModels;

/// Builds a reference template for every .pgm in `image_dir` (sorted by name;
/// id = file stem) and writes <id>.lfr files plus manifest.txt into `out_dir`.
EnrollmentReport enroll_directory(const std::filesystem::path& image_dir, const std::filesystem::path& out_dir,
                                  const EngineConfig& config, const EngineModels& models);

}  // namespace lfs
