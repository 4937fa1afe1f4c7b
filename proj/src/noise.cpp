#include "fencekit/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fencekit/geometry.hpp"

namespace fencekit {

namespace {

constexpr double kRefSide = 299.0;

double side_scale(const ImageTensor& x) { return double(std::min(x.height, x.width)) / kRefSide; }

}  // namespace

std::vector<double> motion_line_kernel(int phi, double angle) {
  if (phi < 3 || phi % 2 == 0) throw std::invalid_argument("motion kernel size must be odd >= 3");
  std::vector<double> k(size_t(phi) * phi, 0.0);
  int c = phi / 2;
  double dx = std::cos(angle), dy = std::sin(angle);
  // midpoint-style rasterization: step along the dominant axis
  if (std::abs(dx) >= std::abs(dy)) {
    double slope = dy / dx;
    for (int j = 0; j < phi; ++j) {
      int i = c + int(std::lround((j - c) * slope));
      if (i >= 0 && i < phi) k[size_t(i) * phi + j] = 1.0;
    }
  } else {
    double slope = dx / dy;
    for (int i = 0; i < phi; ++i) {
      int j = c + int(std::lround((i - c) * slope));
      if (j >= 0 && j < phi) k[size_t(i) * phi + j] = 1.0;
    }
  }
  double sum = 0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;
  return k;
}

ImageTensor apply_smb(const SmbSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.delta < 3) throw std::invalid_argument("SMB: delta must be >= 3");
  int delta = std::max(3, int(std::lround(s.delta * side_scale(x))) | 1);
  int phi = int(rng.uniform_int(3, delta)) | 1;  // force an odd kernel size
  double angle = rng.uniform(0.0, M_PI);
  ImageTensor out = convolve(x, motion_line_kernel(phi, angle), phi);
  clip_unit(out);
  return out;
}

void glass_swap_pass(ImageTensor& x, int delta_max, int iters, RngStream& rng) {
  if (delta_max < 0) throw std::invalid_argument("SGB: delta_max must be >= 0");
  for (int pass = 0; pass < iters; ++pass)
    for (int i = 0; i < x.height; ++i)
      for (int j = 0; j < x.width; ++j) {
        int u = int(rng.uniform_int(-delta_max, delta_max));
        int v = int(rng.uniform_int(-delta_max, delta_max));
        int ci = std::clamp(i + u, 0, x.height - 1);
        int cj = std::clamp(j + v, 0, x.width - 1);
        for (int c = 0; c < x.channels; ++c) std::swap(x.at(i, j, c), x.at(ci, cj, c));
      }
}

ImageTensor apply_sgb(const SgbSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.sigma_min < 0 || s.sigma_min > s.sigma_max)
    throw std::invalid_argument("SGB: need 0 <= sigma_min <= sigma_max");
  if (s.delta_candidates.empty() || s.iter_candidates.empty())
    throw std::invalid_argument("SGB: empty candidate list");

  double sigma = rng.uniform(s.sigma_min, s.sigma_max);
  int delta = s.delta_candidates[rng.uniform_int(0, int64_t(s.delta_candidates.size()) - 1)];
  int iters = s.iter_candidates[rng.uniform_int(0, int64_t(s.iter_candidates.size()) - 1)];

  ImageTensor out = gaussian_blur(x, sigma);
  glass_swap_pass(out, delta, iters, rng);
  out = gaussian_blur(out, sigma);
  clip_unit(out);
  return out;
}

ImageTensor apply_rgn(const RgnSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.sigma_min < 0 || s.sigma_min > s.sigma_max)
    throw std::invalid_argument("RGN: need 0 <= sigma_min <= sigma_max");
  double sigma = rng.uniform(s.sigma_min, s.sigma_max);
  ImageTensor out = x;
  for (float& v : out.data) v = float(double(v) + sigma * rng.normal());
  clip_unit(out);
  return out;
}

ImageTensor apply_rscd(const RscdSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.lambda < 0 || s.rho < 1) throw std::invalid_argument("RSCD: parameters out of range");
  if (s.rho >= std::min(x.height, x.width))
    throw std::invalid_argument("RSCD: rho must be smaller than the image side");

  ImageTensor out = x;
  int n = int(std::floor(rng.uniform(0.0, double(s.lambda))));
  for (int b = 0; b < n; ++b) {
    int h = std::max(1, int(std::floor(rng.uniform(1.0, double(s.rho)))));
    int w = std::max(1, int(std::floor(rng.uniform(1.0, double(s.rho)))));
    int y0 = int(rng.uniform_int(0, x.height - h));
    int x0 = int(rng.uniform_int(0, x.width - w));
    for (int i = y0; i < y0 + h; ++i)
      for (int j = x0; j < x0 + w; ++j)
        for (int c = 0; c < x.channels; ++c) out.at(i, j, c) = 0.0f;
  }
  return out;
}

ImageTensor apply_pd(const PdSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.window < 1) throw std::invalid_argument("PD: window must be >= 1");
  if (s.deflections < 0) throw std::invalid_argument("PD: deflections must be >= 0");

  int n = int(std::lround(double(s.deflections) * x.height * x.width / (kRefSide * kRefSide)));
  int w = std::max(1, int(std::lround(s.window * side_scale(x))));

  ImageTensor out = x;
  for (int t = 0; t < n; ++t) {
    int i = int(rng.uniform_int(0, x.height - 1));
    int j = int(rng.uniform_int(0, x.width - 1));
    int qi = int(rng.uniform_int(std::max(0, i - w), std::min(x.height - 1, i + w)));
    int qj = int(rng.uniform_int(std::max(0, j - w), std::min(x.width - 1, j + w)));
    for (int c = 0; c < x.channels; ++c) out.at(i, j, c) = out.at(qi, qj, c);
  }
  return out;
}

}  // namespace fencekit
