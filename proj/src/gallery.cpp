#include "lfs/gallery.hpp"

#include <algorithm>
#include <stdexcept>

#include "lfs/image.hpp"
#include "lfs/template_builder.hpp"

namespace lfs {

void GalleryIndex::add(const std::string& id, const ReferenceRecord& record,
                       std::optional<std::filesystem::path> image_path) {
  if (id.empty()) {
    throw std::invalid_argument("gallery: empty reference id");
  }
  if (by_id_.count(id) != 0) {
    throw std::invalid_argument("gallery: duplicate reference id '" + id + "'");
  }
  GalleryEntry e;
  e.id = id;
  e.minutiae = PackedMinutiae::pack(record.minutiae);
  e.texture = PackedTextureReference::pack(record.texture);
  if (!e.texture.minutiae.empty() && e.texture.subquantizers != codebook_.subquantizers()) {
    throw std::invalid_argument("gallery: texture codes of '" + id + "' do not fit the codebook");
  }
  if (!codebook_.empty() &&
      std::any_of(e.texture.codes.begin(), e.texture.codes.end(),
                  [&](std::uint8_t c) { return c >= codebook_.centroids(); })) {
    throw std::invalid_argument("gallery: code index out of range in '" + id + "'");
  }
  e.image_path = std::move(image_path);
  by_id_.emplace(id, entries_.size());
  entries_.push_back(std::move(e));
}

const GalleryEntry* GalleryIndex::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

GalleryIndex load_gallery(const std::filesystem::path& manifest, const PqCodebook& codebook) {
  GalleryIndex index(codebook);
  for (const auto& e : read_manifest(manifest)) {
    index.add(e.id, read_reference_file(e.template_path), e.image_path);
  }
  return index;
}

EnrollmentReport enroll_directory(const std::filesystem::path& image_dir, const std::filesystem::path& out_dir,
                                  const EngineConfig& config, const EngineModels& models) {
  std::vector<std::filesystem::path> files;
  for (const auto& de : std::filesystem::directory_iterator(image_dir)) {
    if (de.is_regular_file() && de.path().extension() == ".pgm") {
      files.push_back(de.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::filesystem::create_directories(out_dir);
  EnrollmentReport report;
  std::vector<ManifestEntry> manifest;
  for (const auto& f : files) {
    try {
      const auto image = read_pgm(f);
      const auto built = build_reference_template(image, config, models);
      const auto id = f.stem().string();
      const auto tpl = out_dir / (id + ".lfr");
      write_reference_file(built.record, tpl);
      manifest.push_back({id, tpl, std::filesystem::absolute(f)});
      ++report.enrolled;
    } catch (const std::exception& ex) {
      report.failures.push_back(f.filename().string() + ": " + ex.what());
    }
  }
  write_manifest(manifest, out_dir / "manifest.txt");
  return report;
}

}  // namespace lfs
