#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pgs/scene.hpp"

namespace pgs {

struct LossWeights {
  double lambda_ssim = 0.2;
  double lambda_vol = 0.01;
  double lambda_nce = 0.005;
  double lambda_e = 5e-4;  // swept over [5e-4, 4e-3] for different rate points

  void validate() const;
};

// Interleaved RGB, row-major, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  double& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

struct ImagePair {
  Image rendered;
  Image ground_truth;
};

// Mean SSIM over pixels and channels: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1. Near the border the window is
// truncated to the image and renormalized.
double ssim(const Image& a, const Image& b);

double l1_loss(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b);

// (1/L) * sum_l [(1 - lambda) * L1_l + lambda * (1 - SSIM_l)]
double c2f_loss(std::span<const ImagePair> per_level, double lambda_ssim);

enum class NceForm {
  kLiteral,    // denominator over negatives only
  kInclusive,  // positive included in the denominator
};

struct NceOptions {
  double temperature = 0.03;
  NceForm form = NceForm::kLiteral;
  bool normalize = false;  // L2-normalize every vector before the dot products
};

// -ln( exp(<a, p>/t) / sum_j exp(<a, n_j>/t) ), evaluated with log-sum-exp.
double info_nce(std::span<const double> anchor, std::span<const double> parent,
                std::span<const std::vector<double>> negatives, const NceOptions& opt = {});

// Sum over Gaussians of sx * sy * sz.
double volume_loss(std::span<const Vec3> scales);

struct LossTerms {
  double c2f = 0.0;
  double vol = 0.0;
  double nce = 0.0;
  double rate = 0.0;
};

double total_loss(const LossTerms& terms, const LossWeights& w);

// Plug-in mutual information in nats: per dimension, equal-width
// histograms over each variable's sample range, MI = H(X) + H(Y) - H(X,Y);
// the result is the mean over dimensions. x and y are n samples of d values.
double mi_estimate(std::span<const std::vector<double>> x, std::span<const std::vector<double>> y, int bins = 16);

}  // namespace pgs
