#pragma once

// Synthetic data for tests, the acceptance harness and the `synth` command:
// sinusoidal ridge images, phase-field prints with planted minutiae, image
// degradation, descriptor corpora and perturbed template galleries.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lfs/image.hpp"
#include "lfs/types.hpp"

namespace lfs {

/// Parallel ridges: value = mean + amplitude * cos(2 pi t / period + phase),
/// t measured along the ridge normal (-sin o, cos o) from the image centre.
GrayImage sinusoid_image(int width, int height, double orientation, double period, double phase = 0.0,
                         double mean = 127.5, double amplitude = 100.0);

/// Gaussian pixel noise.
GrayImage noise_image(int width, int height, double mean, double sigma, std::uint64_t seed);

struct PrintOptions {
  int width = 512;
  int height = 512;
  double period = 9.0;
  int minutiae = 24;
  double min_separation = 40.0;
  double warp = 1.0;  // strength of the low-frequency flow bend
  std::uint64_t seed = 1;
};

struct SyntheticPrint {
  GrayImage image;
  std::vector<Minutia> minutiae;  // planted singular points; theta is the local flow lifted by spiral sign
  std::vector<std::uint8_t> foreground;  // per-pixel mask of the inked ellipse
};

/// Phase-field print: curved parallel ridges plus one phase spiral per planted
/// minutia, dark ridges on an elliptical foreground, light background.
SyntheticPrint synthesize_print(const PrintOptions& options);

/// Gaussian blur followed by additive Gaussian noise, clamped to [0, 255].
GrayImage degrade_image(const GrayImage& image, double noise_sigma, double blur_sigma, std::uint64_t seed);

/// Latent-like copy: partial elliptical crop, reduced contrast, structured
/// background and pixel noise.
GrayImage make_latent(const GrayImage& print, std::uint64_t seed);

/// Descriptor source: normalize(tanh(A z + b)) with z ~ N(0, I_k).
class DescriptorGenerator {
 public:
  DescriptorGenerator(std::size_t dim, std::size_t latent_dim, std::uint64_t seed);

  std::vector<float> sample(std::mt19937_64& rng) const;
  std::size_t dim() const noexcept { return static_cast<std::size_t>(a_.rows()); }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

/// `count` generator samples.
std::vector<std::vector<float>> descriptor_corpus(const DescriptorGenerator& gen, std::size_t count,
                                                  std::uint64_t seed);

/// Adds N(0, eps^2) per component and renormalizes.
std::vector<float> perturb_descriptor(std::span<const float> values, double eps, std::mt19937_64& rng);

struct SyntheticReference {
  std::string id;
  MinutiaeTemplate minutiae;  // compressed descriptors
  TextureTemplate texture;    // compressed descriptors; quantize before enrolment
};

struct SyntheticGalleryOptions {
  std::size_t minutiae = 40;
  int width = 512;
  int height = 512;
  int stride = 32;
  int border_margin = 16;
  double min_separation = 16.0;
};

SyntheticReference synthesize_reference(const std::string& id, const DescriptorGenerator& gen,
                                        const SyntheticGalleryOptions& options, std::mt19937_64& rng);

struct PerturbOptions {
  double max_rotation = kPi / 6.0;
  double max_translation = 40.0;
  double deletion = 0.2;
  double spurious = 0.1;
  double descriptor_noise = 0.05;
};

struct SyntheticProbe {
  std::array<MinutiaeTemplate, 3> minutiae;
  TextureTemplate texture;
};

/// Three independent perturbations of the reference minutiae under one shared
/// rigid transform, plus a perturbed copy of its texture template. Points
/// mapped outside the image are dropped.
SyntheticProbe perturb_reference(const SyntheticReference& ref, const DescriptorGenerator& gen,
                                 const SyntheticGalleryOptions& gallery, const PerturbOptions& options,
                                 std::mt19937_64& rng);

}  // namespace lfs
