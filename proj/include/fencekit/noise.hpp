#pragma once
// Noise-injection transforms.

#include <vector>

#include "fencekit/image.hpp"
#include "fencekit/rng.hpp"

namespace fencekit {

// Simulated motion blur: convolve with a normalized straight-line kernel of
// random odd size phi ~ odd values in [3, delta'] at a random angle U(0, pi).
// delta = 9 at reference scale; delta' = max(3, odd(round(delta * s))).
// Draw order: phi, angle.
struct SmbSpec {
  int delta = 9;  // maximum kernel size, reference scale
  bool operator==(const SmbSpec&) const = default;
};
ImageTensor apply_smb(const SmbSpec& s, const ImageTensor& x, RngStream& rng);

// phi x phi kernel with a centred rasterized line at `angle` (radians from
// the x axis), normalized to sum 1.
std::vector<double> motion_line_kernel(int phi, double angle);

// Simulated glass blur: Gaussian blur, `iters` raster passes of random local
// pixel swaps with offsets ~ integer U(-delta_max, delta_max) (clipped at the
// borders), then a second identical blur.
// Draw order: sigma, delta_max choice, iters choice, then per pass and pixel
// the row offset and column offset.
struct SgbSpec {
  double sigma_min = 0.7;
  double sigma_max = 1.5;
  std::vector<int> delta_candidates = {1, 2, 3, 4};
  std::vector<int> iter_candidates = {1, 2, 3};
  bool operator==(const SgbSpec&) const = default;
};
ImageTensor apply_sgb(const SgbSpec& s, const ImageTensor& x, RngStream& rng);

// The swap stage alone (exposed so its permutation property can be checked).
void glass_swap_pass(ImageTensor& x, int delta_max, int iters, RngStream& rng);

// Additive Gaussian noise with a random std sigma ~ U(sigma_min, sigma_max).
// Draw order: sigma, then one normal per value in storage order.
struct RgnSpec {
  double sigma_min = 0.0005;
  double sigma_max = 0.005;
  bool operator==(const RgnSpec&) const = default;
};
ImageTensor apply_rgn(const RgnSpec& s, const ImageTensor& x, RngStream& rng);

// Random black occlusion boxes: n ~ floor(U(0, lambda)) boxes with sides
// h, w ~ floor(U(1, rho)) at uniform valid positions, filled with 0.
// Draw order per box: h, w, top row, left column.
struct RscdSpec {
  int lambda = 8;  // exclusive upper bound on the box count
  int rho = 8;     // exclusive upper bound on the box side
  bool operator==(const RscdSpec&) const = default;
};
ImageTensor apply_rscd(const RscdSpec& s, const ImageTensor& x, RngStream& rng);

// Pixel deflection: round(deflections * H*W / 299^2) random pixels each take
// the value of a random neighbour within `window'` (window rescaled,
// min 1).  Draw order per deflection: row, column, neighbour row, neighbour
// column.
struct PdSpec {
  int deflections = 200;  // reference-scale count (at 299x299)
  int window = 10;        // reference-scale half-window
  bool operator==(const PdSpec&) const = default;
};
ImageTensor apply_pd(const PdSpec& s, const ImageTensor& x, RngStream& rng);

}  // namespace fencekit
