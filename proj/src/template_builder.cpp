#include "lfs/template_builder.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lfs/descriptor.hpp"
#include "lfs/minutiae_map.hpp"
#include "lfs/synthetic.hpp"

namespace lfs {

void save_models(const EngineModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_compressor(models.compressor, dir / "compressor.bin");
  write_codebook(models.codebook, dir / "codebook.bin");
  std::ofstream out(dir / "model.cfg");
  if (!out) {
    throw std::runtime_error("cannot write " + (dir / "model.cfg").string());
  }
  out.precision(17);
  out << "d0 = " << models.d0 << "\n";
}

EngineModels load_models(const std::filesystem::path& dir) {
  EngineModels models;
  models.compressor = read_compressor(dir / "compressor.bin");
  models.codebook = read_codebook(dir / "codebook.bin");
  std::ifstream in(dir / "model.cfg");
  if (!in) {
    throw std::runtime_error("cannot open " + (dir / "model.cfg").string());
  }
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, eq;
    double value = 0.0;
    if (ls >> key >> eq >> value && key == "d0" && eq == "=") {
      models.d0 = value;
    }
  }
  if (!(models.d0 > 0.0)) {
    throw FormatError("model.cfg: missing or non-positive d0");
  }
  return models;
}

std::vector<Minutia> extract_virtual_minutiae(const RidgeFields& fields, const VirtualMinutiaGrid& grid) {
  if (grid.stride <= 0 || grid.border_margin < 0) {
    throw std::invalid_argument("virtual grid: stride must be positive, margin non-negative");
  }
  std::vector<Minutia> out;
  if (fields.empty() || fields.roi.empty()) {
    return out;
  }
  const int w = fields.image_width;
  const int h = fields.image_height;
  const int bs = fields.block_size;
  const int m = grid.border_margin;
  for (int y = 0; y < h; y += grid.stride) {
    for (int x = 0; x < w; x += grid.stride) {
      if (x - m < 0 || y - m < 0 || x + m >= w || y + m >= h) {
        continue;
      }
      bool inside = true;
      for (int r = (y - m) / bs; r <= (y + m) / bs && inside; ++r) {
        for (int c = (x - m) / bs; c <= (x + m) / bs; ++c) {
          if (!fields.roi_at(r, c)) {
            inside = false;
            break;
          }
        }
      }
      if (!inside) {
        continue;
      }
      const double flow = fields.orientation[fields.index(y / bs, x / bs)];
      out.push_back({static_cast<double>(x), static_cast<double>(y), flow, MinutiaKind::kVirtual});
    }
  }
  return out;
}

std::vector<Descriptor> describe(const GrayImage& image, std::span<const Minutia> minutiae,
                                 const CompressorModel& compressor) {
  if (compressor.empty()) {
    throw std::invalid_argument("describe: compressor model is empty");
  }
  std::vector<Descriptor> out;
  out.reserve(minutiae.size());
  if (minutiae.empty()) {
    return out;
  }
  const DescriptorExtractor extractor(image);
  for (const auto& m : minutiae) {
    out.push_back(compress_descriptor(compressor, extractor.extract(m)));
  }
  return out;
}

namespace {

std::vector<Minutia> detect(const ProcessedImage& img, const RidgeFields& fields, const EngineConfig& config) {
  return decode_minutiae_map(detect_minutiae_baseline(img, fields, config.encoder), config.m_t);
}

}  // namespace

LatentTemplates build_latent_templates(const GrayImage& image, const EngineConfig& config,
                                       const CompressorModel& compressor, const RidgeDictionary& dict) {
  if (image.empty()) {
    throw std::invalid_argument("build_latent_templates: empty image");
  }
  if (compressor.empty()) {
    throw std::invalid_argument("build_latent_templates: compressor model is empty");
  }
  LatentTemplates out;
  const auto decomposed = decompose_texture(image);
  auto enhanced = stft_enhance(decomposed.pixels);
  enhanced.tag = PipelineTag::kDecomposed;
  out.fields = segment_roi(estimate_ridge_fields(enhanced.pixels, image, dict, config.alpha), config.s_r);

  const auto contrast = contrast_enhance(image);
  auto contrast_stft = stft_enhance(contrast.pixels);
  contrast_stft.tag = PipelineTag::kContrastStft;
  auto contrast_gabor = gabor_enhance(contrast.pixels, out.fields);
  contrast_gabor.tag = PipelineTag::kContrastGabor;
  out.processed = {stft_enhance(image), std::move(contrast_stft), enhanced, gabor_enhance(decomposed.pixels, out.fields),
                   std::move(contrast_gabor)};
  for (std::size_t k = 0; k < 5; ++k) {
    out.sets[k] = detect(out.processed[k], out.fields, config);
  }
  const auto common = vote_common_minutiae(out.sets, config.vote);

  const std::array<const std::vector<Minutia>*, 3> kept{&out.sets[0], &out.sets[2], &common};
  const std::array<TemplateSource, 3> sources{TemplateSource::kLatentStft, TemplateSource::kLatentEnhanced,
                                              TemplateSource::kLatentCommon};
  for (std::size_t t = 0; t < 3; ++t) {
    auto& tpl = out.minutiae[t];
    tpl.source = sources[t];
    tpl.minutiae = *kept[t];
    tpl.descriptors = describe(enhanced.pixels, tpl.minutiae, compressor);
  }
  out.texture.minutiae = extract_virtual_minutiae(out.fields, {config.stride, config.border_margin});
  out.texture.descriptors = describe(enhanced.pixels, out.texture.minutiae, compressor);
  return out;
}

ReferenceTemplates build_reference_template(const GrayImage& image, const EngineConfig& config,
                                            const EngineModels& models, const RidgeDictionary& dict) {
  if (image.empty()) {
    throw std::invalid_argument("build_reference_template: empty image");
  }
  if (models.codebook.empty()) {
    throw std::invalid_argument("build_reference_template: codebook is empty");
  }
  ReferenceTemplates out;
  out.fields = estimate_reference_fields(image, dict, config.s_r);
  const ProcessedImage raw{image, PipelineTag::kDecomposed};
  auto& mt = out.record.minutiae;
  mt.source = TemplateSource::kReference;
  mt.minutiae = detect(raw, out.fields, config);
  mt.descriptors = describe(image, mt.minutiae, models.compressor);

  auto& tt = out.record.texture;
  tt.minutiae = extract_virtual_minutiae(out.fields, {config.stride, config.border_margin});
  for (const auto& d : describe(image, tt.minutiae, models.compressor)) {
    tt.descriptors.push_back(quantize_descriptor(models.codebook, d));
  }
  return out;
}

EngineModels train_models(std::span<const GrayImage> images, const EngineConfig& config,
                          const ModelTrainingOptions& options) {
  if (images.empty()) {
    throw std::invalid_argument("train_models: no images");
  }
  const VirtualMinutiaGrid grid{config.stride, config.border_margin};
  struct Sample {
    GrayImage enhanced_degraded;
    std::vector<Minutia> virtuals;
    std::vector<Descriptor> ref_raw;
    std::vector<Descriptor> latent_raw;
  };
  std::vector<Sample> samples;
  std::vector<std::vector<float>> corpus;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    Sample s;
    const auto fields = estimate_reference_fields(img, default_dictionary(), config.s_r);
    s.virtuals = extract_virtual_minutiae(fields, grid);
    const auto real = detect({img, PipelineTag::kDecomposed}, fields, config);
    const auto degraded = degrade_image(img, 12.0, 1.2, options.seed + i);
    s.enhanced_degraded = stft_enhance(decompose_texture(degraded).pixels).pixels;

    const DescriptorExtractor ref_ex(img);
    const DescriptorExtractor lat_ex(s.enhanced_degraded);
    for (const auto& m : s.virtuals) {
      s.ref_raw.push_back(ref_ex.extract(m));
      s.latent_raw.push_back(lat_ex.extract(m));
      corpus.push_back(s.ref_raw.back().values);
      corpus.push_back(s.latent_raw.back().values);
    }
    for (const auto& m : real) {
      corpus.push_back(ref_ex.extract(m).values);
      corpus.push_back(lat_ex.extract(m).values);
    }
    samples.push_back(std::move(s));
  }

  EngineModels models;
  models.compressor = train_compressor(corpus, options.compressor);

  std::vector<std::vector<float>> compressed;
  compressed.reserve(corpus.size());
  for (const auto& row : corpus) {
    compressed.push_back(models.compressor.forward(row));
  }
  if (compressed.size() > options.pq_corpus_limit) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(compressed.begin(), compressed.end(), rng);
    compressed.resize(options.pq_corpus_limit);
  }
  models.codebook = train_pq(compressed, options.pq);

  std::vector<double> genuine;
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < s.virtuals.size(); ++k) {
      const auto q = quantize_descriptor(models.codebook, compress_descriptor(models.compressor, s.ref_raw[k]));
      const auto x = compress_descriptor(models.compressor, s.latent_raw[k]);
      genuine.push_back(adc_distance(x, q, models.codebook));
    }
  }
  if (genuine.empty()) {
    throw std::invalid_argument("train_models: images produced no virtual minutiae");
  }
  models.d0 = calibrate_d0(genuine, options.d0_quantile);
  return models;
}

}  // namespace lfs
