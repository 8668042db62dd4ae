#include "lfs/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace lfs {

GrayImage::GrayImage(int w, int h, float fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

float GrayImage::clamped(int x, int y) const noexcept {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return at(x, y);
}

float GrayImage::bilinear(double x, double y) const noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const double top = (1.0 - ax) * clamped(x0, y0) + ax * clamped(x0 + 1, y0);
  const double bottom = (1.0 - ax) * clamped(x0, y0 + 1) + ax * clamped(x0 + 1, y0 + 1);
  return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

RgbImage::RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

void RgbImage::set(int x, int y, std::array<std::uint8_t, 3> rgb) noexcept {
  if (x < 0 || y < 0 || x >= width || y >= height) {
    return;
  }
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = rgb[0];
  pixels[i + 1] = rgb[1];
  pixels[i + 2] = rgb[2];
}

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) {
      t.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (t.empty()) {
      throw std::runtime_error("truncated PGM header");
    }
    return t;
  }

  int number() {
    const auto t = token();
    try {
      return std::stoi(t);
    } catch (const std::exception&) {
      throw std::runtime_error("malformed PGM header field: " + t);
    }
  }

  // exactly one whitespace byte separates the header from binary data
  void skip_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw std::runtime_error("malformed PGM header");
    }
    ++pos_;
  }

  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
          ++pos_;
        }
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  PgmReader reader(bytes);
  const auto magic = reader.token();
  if (magic != "P5" && magic != "P2") {
    throw std::runtime_error("not a graymap (expected P5 or P2)");
  }
  const int w = reader.number();
  const int h = reader.number();
  const int maxval = reader.number();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::runtime_error("invalid PGM dimensions or maxval");
  }
  GrayImage img(w, h);
  const double scale = 255.0 / maxval;
  const auto n = img.pixels.size();
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      img.pixels[i] = static_cast<float>(reader.number() * scale);
    }
    return img;
  }
  reader.skip_single_space();
  const auto data = reader.rest();
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  if (data.size() < n * bpp) {
    throw std::runtime_error("truncated PGM pixel data");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int v = bpp == 1 ? data[i] : (data[2 * i] << 8) | data[2 * i + 1];
    img.pixels[i] = static_cast<float>(v * scale);
  }
  return img;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_pgm(bytes);
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size());
  for (float v : image.pixels) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 255.0f))));
  }
  return out;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  if (sigma <= 0.0 || image.empty()) {
    return image;
  }
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    sum += kernel[k + radius];
  }
  for (auto& k : kernel) {
    k /= sum;
  }
  GrayImage tmp(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * image.clamped(x + k, y);
      }
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  GrayImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp.clamped(x, y + k);
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

GrayImage box_mean(const GrayImage& image, int radius) {
  if (radius <= 0 || image.empty()) {
    return image;
  }
  const double norm = 1.0 / (2 * radius + 1);
  GrayImage tmp(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      acc += image.clamped(k, y);
    }
    for (int x = 0; x < image.width; ++x) {
      tmp.at(x, y) = static_cast<float>(acc * norm);
      acc += image.clamped(x + radius + 1, y) - image.clamped(x - radius, y);
    }
  }
  GrayImage out(image.width, image.height);
  for (int x = 0; x < image.width; ++x) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      acc += tmp.clamped(x, k);
    }
    for (int y = 0; y < image.height; ++y) {
      out.at(x, y) = static_cast<float>(acc * norm);
      acc += tmp.clamped(x, y + radius + 1) - tmp.clamped(x, y - radius);
    }
  }
  return out;
}

void clamp_to_byte_range(GrayImage& image) noexcept {
  for (auto& v : image.pixels) {
    v = std::clamp(v, 0.0f, 255.0f);
  }
}

double correlation(std::span<const float> a, std::span<const float> b) noexcept {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) {
    return 0.0;
  }
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) {
    return 0.0;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace lfs
