#include "pgs/objectives.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "pgs/error.hpp"

namespace pgs {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable Gaussian blur of one plane; out-of-image taps are dropped and
// the remaining weights renormalized.
std::vector<double> blur(const std::vector<double>& plane, int width, int height) {
  static const auto w = gaussian_window();
  constexpr int r = kWindow / 2;
  std::vector<double> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx < 0 || xx >= width) continue;
        acc += w[k + r] * plane[static_cast<std::size_t>(y) * width + xx];
        norm += w[k + r];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc / norm;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy < 0 || yy >= height) continue;
        acc += w[k + r] * tmp[static_cast<std::size_t>(yy) * width + x];
        norm += w[k + r];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc / norm;
    }
  }
  return out;
}

void check_pair(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw InvariantError("image sizes differ");
  if (a.width <= 0 || a.height <= 0) throw InvariantError("empty image");
  const std::size_t n = static_cast<std::size_t>(a.width) * a.height * 3;
  if (a.pixels.size() != n || b.pixels.size() != n) throw InvariantError("image buffer has the wrong size");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> unit(std::span<const double> v) {
  const double n = std::sqrt(dot(v, v));
  std::vector<double> out(v.begin(), v.end());
  if (n > 0.0)
    for (auto& x : out) x /= n;
  return out;
}

double log_sum_exp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<int> bin_indices(std::span<const std::vector<double>> samples, std::size_t dim, int bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s[dim]);
    hi = std::max(hi, s[dim]);
  }
  std::vector<int> idx(samples.size(), 0);
  if (!(hi > lo)) return idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = (samples[i][dim] - lo) / (hi - lo) * bins;
    idx[i] = std::min(bins - 1, static_cast<int>(t));
  }
  return idx;
}

double plogp_sum(const std::vector<std::size_t>& counts, double n) {
  double h = 0.0;
  for (std::size_t c : counts)
    if (c) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_ssim < 0.0 || lambda_ssim > 1.0) throw InvariantError("lambda_ssim must be in [0, 1]");
  if (lambda_vol < 0.0 || lambda_nce < 0.0 || lambda_e < 0.0) throw InvariantError("loss weights must be >= 0");
}

double ssim(const Image& a, const Image& b) {
  check_pair(a, b);
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = a.pixels[i * 3 + c];
      pb[i] = b.pixels[i * 3 + c];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto mu_a = blur(pa, w, h), mu_b = blur(pb, w, h);
    const auto e_aa = blur(paa, w, h), e_bb = blur(pbb, w, h), e_ab = blur(pab, w, h);
    for (std::size_t i = 0; i < n; ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
  }
  return total / (3.0 * static_cast<double>(n));
}

double l1_loss(const Image& a, const Image& b) {
  check_pair(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) s += std::abs(a.pixels[i] - b.pixels[i]);
  return s / static_cast<double>(a.pixels.size());
}

double psnr(const Image& a, const Image& b) {
  check_pair(a, b);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double c2f_loss(std::span<const ImagePair> per_level, double lambda_ssim) {
  if (per_level.empty()) throw InvariantError("c2f_loss: needs at least one level");
  double sum = 0.0;
  for (const auto& p : per_level)
    sum += (1.0 - lambda_ssim) * l1_loss(p.rendered, p.ground_truth) +
           lambda_ssim * (1.0 - ssim(p.rendered, p.ground_truth));
  return sum / static_cast<double>(per_level.size());
}

double info_nce(std::span<const double> anchor, std::span<const double> parent,
                std::span<const std::vector<double>> negatives, const NceOptions& opt) {
  if (negatives.empty()) throw InvariantError("info_nce: needs at least one negative");
  if (!(opt.temperature > 0.0)) throw InvariantError("info_nce: temperature must be positive");
  if (parent.size() != anchor.size()) throw InvariantError("info_nce: vector widths differ");
  for (const auto& n : negatives)
    if (n.size() != anchor.size()) throw InvariantError("info_nce: vector widths differ");

  std::vector<double> a(anchor.begin(), anchor.end());
  if (opt.normalize) a = unit(anchor);
  auto score = [&](std::span<const double> v) {
    return (opt.normalize ? dot(a, unit(v)) : dot(a, v)) / opt.temperature;
  };

  const double positive = score(parent);
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  if (opt.form == NceForm::kInclusive) logits.push_back(positive);
  for (const auto& n : negatives) logits.push_back(score(n));
  return log_sum_exp(logits) - positive;
}

double volume_loss(std::span<const Vec3> scales) {
  double v = 0.0;
  for (const auto& s : scales) {
    if (s[0] < 0.0 || s[1] < 0.0 || s[2] < 0.0) throw InvariantError("volume_loss: scales must be non-negative");
    v += s[0] * s[1] * s[2];
  }
  return v;
}

double total_loss(const LossTerms& t, const LossWeights& w) {
  return t.c2f + w.lambda_vol * t.vol + w.lambda_nce * t.nce + w.lambda_e * t.rate;
}

double mi_estimate(std::span<const std::vector<double>> x, std::span<const std::vector<double>> y, int bins) {
  if (x.empty() || x.size() != y.size()) throw InvariantError("mi_estimate: need the same non-zero sample count");
  if (bins < 1) throw InvariantError("mi_estimate: bins must be >= 1");
  const std::size_t dims = x.front().size();
  if (dims == 0) throw InvariantError("mi_estimate: zero-width samples");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i].size() != dims || y[i].size() != dims) throw InvariantError("mi_estimate: ragged samples");

  const auto b = static_cast<std::size_t>(bins);
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    const auto bx = bin_indices(x, d, bins);
    const auto by = bin_indices(y, d, bins);
    std::vector<std::size_t> cx(b, 0), cy(b, 0), joint(b * b, 0);
    for (std::size_t i = 0; i < bx.size(); ++i) {
      ++cx[static_cast<std::size_t>(bx[i])];
      ++cy[static_cast<std::size_t>(by[i])];
      ++joint[static_cast<std::size_t>(bx[i]) * b + static_cast<std::size_t>(by[i])];
    }
    // Cells (i, j) and (j, i) are added as one term so swapping x and y
    // leaves every rounding step unchanged.
    double hxy = 0.0;
    auto term = [n](std::size_t c) {
      if (!c) return 0.0;
      const double p = static_cast<double>(c) / n;
      return -p * std::log(p);
    };
    for (std::size_t i = 0; i < b; ++i) {
      hxy += term(joint[i * b + i]);
      for (std::size_t j = i + 1; j < b; ++j) hxy += term(joint[i * b + j]) + term(joint[j * b + i]);
    }
    total += std::max(0.0, plogp_sum(cx, n) + plogp_sum(cy, n) - hxy);
  }
  return total / static_cast<double>(dims);
}

}  // namespace pgs
