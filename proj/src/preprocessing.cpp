#include "lfs/preprocessing.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lfs {
namespace {

constexpr int kWin = kStftWindow;
constexpr int kWinPixels = kWin * kWin;
constexpr double kMinPeriod = 3.0;
constexpr double kMaxPeriod = 20.0;
constexpr double kAngularBandwidth = kPi / 4.0;

bool is_constant(const GrayImage& image) {
  if (image.pixels.empty()) {
    return true;
  }
  const auto [lo, hi] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  return *hi - *lo < 1e-6f;
}

double percentile_abs(std::vector<double> v, double q) {
  if (v.empty()) {
    return 0.0;
  }
  for (auto& x : v) {
    x = std::abs(x);
  }
  const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// robust amplitude of the high-pass part; used as the output contrast scale
double highpass_amplitude(const GrayImage& image) {
  const auto cartoon = gaussian_blur(image, kDecompositionSigma);
  std::vector<double> r(image.pixels.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = image.pixels[i] - cartoon.pixels[i];
  }
  return percentile_abs(std::move(r), 0.99);
}

GrayImage rescale_around_mid(const std::vector<double>& r, int w, int h, double amplitude) {
  GrayImage out(w, h);
  for (std::size_t i = 0; i < r.size(); ++i) {
    out.pixels[i] = static_cast<float>(std::clamp(127.5 + 127.5 * r[i] / amplitude, 0.0, 255.0));
  }
  return out;
}

class FftPlans {
 public:
  FftPlans() {
    auto* in = fftw_alloc_complex(kWinPixels);
    auto* out = fftw_alloc_complex(kWinPixels);
    forward_ = fftw_plan_dft_2d(kWin, kWin, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_2d(kWin, kWin, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  fftw_plan forward() const noexcept { return forward_; }
  fftw_plan backward() const noexcept { return backward_; }

 private:
  fftw_plan forward_;
  fftw_plan backward_;
};

// planner calls are not thread-safe; executes on fresh arrays are
const FftPlans& plans() {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  static const FftPlans instance;
  return instance;
}

struct FftBuffer {
  FftBuffer() : data(fftw_alloc_complex(kWinPixels)) {}
  ~FftBuffer() { fftw_free(data); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
  fftw_complex* data;
};

struct WindowStats {
  double vx = 0.0;  // doubled-angle orientation vector of band energy
  double vy = 0.0;
  double band_energy = 0.0;
  double freq_moment = 0.0;  // sum of energy * radius
  double total_energy = 0.0;
};

int signed_bin(int k) noexcept { return k < kWin / 2 ? k : k - kWin; }

}  // namespace

std::string_view pipeline_tag_name(PipelineTag tag) noexcept {
  switch (tag) {
    case PipelineTag::kDecomposed:
      return "decomposed";
    case PipelineTag::kStft:
      return "stft";
    case PipelineTag::kContrastStft:
      return "contrast_stft";
    case PipelineTag::kGabor:
      return "gabor";
    case PipelineTag::kContrastGabor:
      return "contrast_gabor";
    case PipelineTag::kContrast:
      return "contrast";
  }
  return "unknown";
}

ProcessedImage decompose_texture(const GrayImage& image) {
  if (image.empty()) {
    throw std::invalid_argument("decompose_texture: empty image");
  }
  const auto cartoon = gaussian_blur(image, kDecompositionSigma);
  std::vector<double> r(image.pixels.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = image.pixels[i] - cartoon.pixels[i];
  }
  const double amplitude = percentile_abs(r, 0.995);
  if (amplitude < 1e-9) {
    return {GrayImage(image.width, image.height, 127.5f), PipelineTag::kDecomposed};
  }
  return {rescale_around_mid(r, image.width, image.height, amplitude), PipelineTag::kDecomposed};
}

ProcessedImage stft_enhance(const GrayImage& image) {
  if (image.empty()) {
    throw std::invalid_argument("stft_enhance: empty image");
  }
  if (is_constant(image)) {
    return {image, PipelineTag::kStft};
  }
  const int w = image.width;
  const int h = image.height;
  const int cols = (w + kStftStride - 1) / kStftStride;
  const int rows = (h + kStftStride - 1) / kStftStride;
  const int offset = (kWin - kStftStride) / 2;

  std::vector<double> taper(kWinPixels);
  for (int y = 0; y < kWin; ++y) {
    const double ty = 0.5 * (1.0 - std::cos(kTwoPi * (y + 0.5) / kWin));
    for (int x = 0; x < kWin; ++x) {
      const double tx = 0.5 * (1.0 - std::cos(kTwoPi * (x + 0.5) / kWin));
      taper[y * kWin + x] = tx * ty;
    }
  }

  const auto& fft = plans();
  const double r_lo = kWin / kMaxPeriod;
  const double r_hi = kWin / kMinPeriod;

  std::vector<std::vector<std::complex<double>>> spectra(static_cast<std::size_t>(rows) * cols);
  std::vector<WindowStats> stats(spectra.size());
  FftBuffer in;
  FftBuffer out;

  for (int br = 0; br < rows; ++br) {
    for (int bc = 0; bc < cols; ++bc) {
      const int x0 = bc * kStftStride - offset;
      const int y0 = br * kStftStride - offset;
      double mean = 0.0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          mean += image.clamped(x0 + x, y0 + y);
        }
      }
      mean /= kWinPixels;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          in.data[y * kWin + x][0] = (image.clamped(x0 + x, y0 + y) - mean) * taper[y * kWin + x];
          in.data[y * kWin + x][1] = 0.0;
        }
      }
      fftw_execute_dft(fft.forward(), in.data, out.data);
      auto& spec = spectra[br * cols + bc];
      spec.resize(kWinPixels);
      auto& st = stats[br * cols + bc];
      for (int ky = 0; ky < kWin; ++ky) {
        for (int kx = 0; kx < kWin; ++kx) {
          const std::complex<double> v(out.data[ky * kWin + kx][0], out.data[ky * kWin + kx][1]);
          spec[ky * kWin + kx] = v;
          const double p = std::norm(v);
          st.total_energy += p;
          const int fx = signed_bin(kx);
          const int fy = signed_bin(ky);
          const double r = std::hypot(fx, fy);
          if (r < r_lo || r > r_hi) {
            continue;
          }
          const double phi = std::atan2(static_cast<double>(fy), static_cast<double>(fx));
          st.vx += p * std::cos(2.0 * phi);
          st.vy += p * std::sin(2.0 * phi);
          st.band_energy += p;
          st.freq_moment += p * r;
        }
      }
    }
  }

  std::vector<double> accum(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<double> weight(accum.size(), 0.0);

  for (int br = 0; br < rows; ++br) {
    for (int bc = 0; bc < cols; ++bc) {
      const auto& own = stats[br * cols + bc];
      WindowStats sm;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = br + dr;
          const int cc = bc + dc;
          if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) {
            continue;
          }
          const auto& s = stats[rr * cols + cc];
          sm.vx += s.vx;
          sm.vy += s.vy;
          sm.band_energy += s.band_energy;
          sm.freq_moment += s.freq_moment;
        }
      }
      const auto& spec = spectra[br * cols + bc];
      const bool has_peak = own.total_energy > 1e-9 && own.band_energy > 1e-3 * own.total_energy &&
                            sm.band_energy > 0.0;
      if (has_peak) {
        const double coherence = std::hypot(sm.vx, sm.vy) / sm.band_energy;
        const double confidence = std::clamp((coherence - 0.1) / 0.3, 0.0, 1.0);
        const double phi0 = 0.5 * std::atan2(sm.vy, sm.vx);
        const double r0 = sm.freq_moment / sm.band_energy;
        const double sigma_r = std::max(1.0, 0.25 * r0);
        for (int ky = 0; ky < kWin; ++ky) {
          for (int kx = 0; kx < kWin; ++kx) {
            const int fx = signed_bin(kx);
            const int fy = signed_bin(ky);
            const double r = std::hypot(fx, fy);
            double gain = 0.0;
            if (r > 0.0) {
              double d = std::abs(std::atan2(static_cast<double>(fy), static_cast<double>(fx)) - phi0);
              d = std::fmod(d, kPi);
              d = std::min(d, kPi - d);
              if (d < kAngularBandwidth) {
                gain = 0.5 * (1.0 + std::cos(kPi * d / kAngularBandwidth)) *
                       std::exp(-(r - r0) * (r - r0) / (2.0 * sigma_r * sigma_r));
              }
            }
            const auto v = spec[ky * kWin + kx] * (gain * confidence);
            in.data[ky * kWin + kx][0] = v.real();
            in.data[ky * kWin + kx][1] = v.imag();
          }
        }
      } else {
        for (int i = 0; i < kWinPixels; ++i) {
          in.data[i][0] = spec[i].real();
          in.data[i][1] = spec[i].imag();
        }
      }
      fftw_execute_dft(fft.backward(), in.data, out.data);
      const int x0 = bc * kStftStride - offset;
      const int y0 = br * kStftStride - offset;
      for (int y = 0; y < kWin; ++y) {
        const int iy = y0 + y;
        if (iy < 0 || iy >= h) {
          continue;
        }
        for (int x = 0; x < kWin; ++x) {
          const int ix = x0 + x;
          if (ix < 0 || ix >= w) {
            continue;
          }
          const double t = taper[y * kWin + x];
          const auto idx = static_cast<std::size_t>(iy) * w + ix;
          accum[idx] += t * out.data[y * kWin + x][0] / kWinPixels;
          weight[idx] += t * t;
        }
      }
    }
  }
  for (std::size_t i = 0; i < accum.size(); ++i) {
    accum[i] = weight[i] > 1e-12 ? accum[i] / weight[i] : 0.0;
  }
  const double amplitude = highpass_amplitude(image);
  if (amplitude < 1e-9) {
    return {image, PipelineTag::kStft};
  }
  return {rescale_around_mid(accum, w, h, amplitude), PipelineTag::kStft};
}

namespace {

constexpr double kGaborSigmaAlong = 5.0;
constexpr double kGaborSigmaNormal = 3.5;
constexpr int kGaborRadius = 13;

std::vector<double> gabor_kernel(double orientation, double spacing) {
  const int side = 2 * kGaborRadius + 1;
  std::vector<double> env(static_cast<std::size_t>(side) * side);
  std::vector<double> k(env.size());
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  double env_sum = 0.0;
  double k_sum = 0.0;
  for (int dy = -kGaborRadius; dy <= kGaborRadius; ++dy) {
    for (int dx = -kGaborRadius; dx <= kGaborRadius; ++dx) {
      const double u = dx * c + dy * s;
      const double v = -dx * s + dy * c;
      const auto i = static_cast<std::size_t>(dy + kGaborRadius) * side + (dx + kGaborRadius);
      env[i] = std::exp(-u * u / (2.0 * kGaborSigmaAlong * kGaborSigmaAlong) -
                        v * v / (2.0 * kGaborSigmaNormal * kGaborSigmaNormal));
      k[i] = env[i] * std::cos(kTwoPi * v / spacing);
      env_sum += env[i];
      k_sum += k[i];
    }
  }
  const double dc = k_sum / env_sum;
  double gain = 0.0;
  for (int dy = -kGaborRadius; dy <= kGaborRadius; ++dy) {
    for (int dx = -kGaborRadius; dx <= kGaborRadius; ++dx) {
      const auto i = static_cast<std::size_t>(dy + kGaborRadius) * side + (dx + kGaborRadius);
      k[i] -= dc * env[i];
      const double v = -dx * s + dy * c;
      gain += k[i] * std::cos(kTwoPi * v / spacing);
    }
  }
  if (gain > 0.0) {
    for (auto& x : k) {
      x /= gain;
    }
  }
  return k;
}

}  // namespace

ProcessedImage gabor_enhance(const GrayImage& image, const RidgeFields& fields) {
  if (image.empty()) {
    throw std::invalid_argument("gabor_enhance: empty image");
  }
  if (fields.empty() || fields.roi_count() == 0) {
    return {image, PipelineTag::kGabor};
  }
  const int w = image.width;
  const int h = image.height;
  const int side = 2 * kGaborRadius + 1;
  std::map<std::pair<double, double>, std::vector<double>> cache;
  std::vector<double> r(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<double> roi_values;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fields.roi_at_pixel(x, y)) {
        continue;
      }
      const auto b = fields.index(std::min(y / fields.block_size, fields.rows - 1),
                                  std::min(x / fields.block_size, fields.cols - 1));
      const double spacing = fields.spacing[b] > 0.0 ? fields.spacing[b] : 9.0;
      const auto key = std::make_pair(fields.orientation[b], spacing);
      auto it = cache.find(key);
      if (it == cache.end()) {
        it = cache.emplace(key, gabor_kernel(key.first, key.second)).first;
      }
      const auto& k = it->second;
      double acc = 0.0;
      for (int dy = -kGaborRadius; dy <= kGaborRadius; ++dy) {
        const double* row = &k[static_cast<std::size_t>(dy + kGaborRadius) * side];
        for (int dx = -kGaborRadius; dx <= kGaborRadius; ++dx) {
          acc += row[dx + kGaborRadius] * image.clamped(x + dx, y + dy);
        }
      }
      r[static_cast<std::size_t>(y) * w + x] = acc;
      roi_values.push_back(acc);
    }
  }
  const double amplitude = percentile_abs(std::move(roi_values), 0.99);
  GrayImage out = image;
  if (amplitude < 1e-9) {
    return {out, PipelineTag::kGabor};
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (fields.roi_at_pixel(x, y)) {
        const double v = 127.5 + 127.5 * r[static_cast<std::size_t>(y) * w + x] / amplitude;
        out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return {out, PipelineTag::kGabor};
}

ProcessedImage contrast_enhance(const GrayImage& image) {
  if (image.empty()) {
    throw std::invalid_argument("contrast_enhance: empty image");
  }
  constexpr int kTile = 32;
  constexpr int kContext = 16;
  GrayImage out = image;
  for (int ty = 0; ty < image.height; ty += kTile) {
    for (int tx = 0; tx < image.width; tx += kTile) {
      float lo = 255.0f;
      float hi = 0.0f;
      bool first = true;
      for (int y = std::max(0, ty - kContext); y < std::min(image.height, ty + kTile + kContext); ++y) {
        for (int x = std::max(0, tx - kContext); x < std::min(image.width, tx + kTile + kContext); ++x) {
          const float v = image.at(x, y);
          if (first) {
            lo = hi = v;
            first = false;
          } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
        }
      }
      if (hi - lo < 1e-6f) {
        continue;
      }
      const float scale = 255.0f / (hi - lo);
      for (int y = ty; y < std::min(image.height, ty + kTile); ++y) {
        for (int x = tx; x < std::min(image.width, tx + kTile); ++x) {
          out.at(x, y) = std::clamp((image.at(x, y) - lo) * scale, 0.0f, 255.0f);
        }
      }
    }
  }
  return {out, PipelineTag::kContrast};
}

}  // namespace lfs
