#pragma once
// Naive serial reference kernels.  These are deliberately simple re-statements
// of the definitions, written independently of the optimized implementations;
// the tests use them as oracles and the benchmark as the comparison baseline.

#include <vector>

#include "fencekit/geometry.hpp"
#include "fencekit/image.hpp"

namespace fencekit::reference {

// Bilinear remap, one pixel at a time, constant border per tap.
ImageTensor remap_naive(const ImageTensor& x, const CoordField& field, float border);

// Bilinear resize with half-pixel centers and edge clamping.
ImageTensor resize_naive(const ImageTensor& x, int out_h, int out_w);

// Dense 2-D convolution with an arbitrary square kernel, half-sample
// reflective borders.
ImageTensor conv2d_dense(const ImageTensor& x, const std::vector<double>& kernel, int ksize);

// Product Gaussian kernel (truncated at ceil(4*sigma), normalized).
std::vector<double> gaussian_kernel_2d(double sigma, int* ksize);

// Direct 8x8 DCT-II coefficient (orthonormal scaling), quadruple loop.
double dct8_coeff(const double block[64], int u, int v);
// Direct inverse from a full coefficient table.
void idct8_naive(const double coeff[64], double out[64]);

// Global SSIM mean via the direct per-window formula.
double ssim_naive(const ImageTensor& a, const ImageTensor& b);

// Serial dense conv forward for the benchmark (same math as the model's first
// convolution): input side x side x cin, kernel 3x3, zero padding 1.
void conv3x3_naive(const std::vector<double>& in, int side, int cin, const std::vector<double>& w,
                   const std::vector<double>& b, int cout, std::vector<double>& out);

}  // namespace fencekit::reference
