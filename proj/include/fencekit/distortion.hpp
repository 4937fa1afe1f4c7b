#pragma once
// Random-distortion transforms.  Parameters marked "reference scale" are given
// for a 299-pixel side and rescaled to the input size at apply time with
// s = min(H, W) / 299.

#include "fencekit/geometry.hpp"
#include "fencekit/image.hpp"
#include "fencekit/rng.hpp"

namespace fencekit {

// Shift + rotate + scale, fused into one interpolation pass; border fill 0.
// Draw order: dy, dx ~ U(-T,T), rotation ~ U(-R,R) degrees, scale ~ U(1-S,1+S).
struct SatSpec {
  double translate = 0.16;  // T, fraction of the side per axis
  double rotate = 4.0;      // R, degrees
  double scale = 0.16;      // S, scale range half-width
  bool operator==(const SatSpec&) const = default;
};
ImageTensor apply_sat(const SatSpec& s, const ImageTensor& x, RngStream& rng);

// Random crop of at least theta*H rows (aspect eta), resized back.
// Draw order: h_new ~ U(theta*h, h), row fraction, column fraction.
struct RscaSpec {
  double theta = 0.66;  // minimum crop fraction of the height
  double eta = 0.91;    // crop aspect ratio: w_new = floor(h_new * eta)
  bool operator==(const RscaSpec&) const = default;
};
ImageTensor apply_rsca(const RscaSpec& s, const ImageTensor& x, RngStream& rng);

// Resize to a random square side in [h, floor(lambda*h)], pad to the enlarged
// canvas with 0.5 at a random offset, resize back.
// Draw order: new side, row offset, column offset.
struct RspaSpec {
  double lambda = 1.3;  // canvas enlargement factor, > 1
  bool operator==(const RspaSpec&) const = default;
};
ImageTensor apply_rspa(const RspaSpec& s, const ImageTensor& x, RngStream& rng);

// Random affine (three jittered control points) followed by a smoothed random
// displacement field.  theta, sigma, alpha are at reference scale.
// Draw order: control jitter (dx, dy per point), then the column-displacement
// field, then the row-displacement field, both in raster order.
struct SetSpec {
  double theta = 20.0;  // control-point jitter half-range, pixels
  double sigma = 10.0;  // smoothing std of the displacement fields, pixels
  double alpha = 60.0;  // displacement amplitude, pixels
  bool operator==(const SetSpec&) const = default;
};
ImageTensor apply_set(const SetSpec& s, const ImageTensor& x, RngStream& rng);

// Random displacement over a uniform grid: every cell span is stretched by
// 1 + U(-delta, delta), accumulated from the top-left corner and renormalized
// to the image side; border fill 0.  d is at reference scale
// (d' = max(2, round(d*s))).  Draw order: column cells, then row cells.
struct RdgSpec {
  int d = 26;           // grid count per axis
  double delta = 0.33;  // stretch half-range
  bool operator==(const RdgSpec&) const = default;
};
ImageTensor apply_rdg(const RdgSpec& s, const ImageTensor& x, RngStream& rng);

}  // namespace fencekit
