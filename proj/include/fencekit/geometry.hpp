#pragma once
// Resampling and filtering primitives shared by the transforms.

#include <vector>

#include "fencekit/image.hpp"

namespace fencekit {

// Per-pixel source coordinates for remap; row-major H*W doubles.
struct CoordField {
  int height = 0;
  int width = 0;
  std::vector<double> x;  // source column for each output pixel
  std::vector<double> y;  // source row for each output pixel

  CoordField() = default;
  CoordField(int h, int w) : height(h), width(w), x(size_t(h) * w), y(size_t(h) * w) {}
  size_t idx(int i, int j) const { return size_t(i) * width + j; }
};

// 2x3 affine map applied to output pixel coordinates (col, row) to obtain the
// source sample position:  sx = a*x + b*y + tx,  sy = c*x + d*y + ty.
struct AffineMap {
  double a = 1, b = 0, tx = 0;
  double c = 0, d = 1, ty = 0;

  // this(other(p)): apply `other` first, then this map.
  AffineMap compose(const AffineMap& other) const;
  static AffineMap identity() { return AffineMap{}; }
};

// Bilinear sample of x at the field coordinates; any tap falling outside the
// image reads `border`.  Throws on shape mismatch or non-finite coordinates.
ImageTensor remap(const ImageTensor& x, const CoordField& field, float border);

ImageTensor remap_affine(const ImageTensor& x, const AffineMap& m, float border);

// Bilinear resize with half-pixel centers and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& x, int out_h, int out_w);

// Separable Gaussian blur, kernel truncated at radius ceil(4*sigma), with
// half-sample reflective borders.  sigma == 0 returns the input unchanged.
ImageTensor gaussian_blur(const ImageTensor& x, double sigma);

// Same filter applied to a raw H*W field (no range clamping).
void gaussian_blur_field(std::vector<double>& field, int h, int w, double sigma);

// Convolution with an arbitrary odd-sized square kernel, reflective borders.
ImageTensor convolve(const ImageTensor& x, const std::vector<double>& kernel, int ksize);

// Reflect an index into [0, n-1] (half-sample symmetric: -1 -> 0, n -> n-1).
int reflect_index(int i, int n);

}  // namespace fencekit
