#pragma once
// Distance and quality metrics between equal-shape images.

#include "fencekit/image.hpp"

namespace fencekit {

// sqrt(sum((a-b)^2)) / (H*W*C).
double l2_distance(const ImageTensor& a, const ImageTensor& b);

// max |a-b|.
double linf_distance(const ImageTensor& a, const ImageTensor& b);

// 10*log10(1/MSE) for unit-range images, capped at 100 dB when MSE < 1e-10.
double psnr(const ImageTensor& a, const ImageTensor& b);

// Mean SSIM over 8x8 uniform windows (stride 1), averaged across channels.
// C1 = 0.01^2, C2 = 0.03^2.  Requires height, width >= 8.
double ssim(const ImageTensor& a, const ImageTensor& b);

}  // namespace fencekit
