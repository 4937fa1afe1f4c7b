// Benchmark: optimized kernels (OpenMP-parallel where applicable) vs the
// naive serial reference implementations.  Each section checks that the two
// implementations agree before timing them, so the benchmark doubles as a
// consistency smoke test.  Run with OMP_NUM_THREADS=N to vary the thread
// count of the optimized side.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fencekit/compression.hpp"
#include "fencekit/geometry.hpp"
#include "fencekit/image.hpp"
#include "fencekit/metrics.hpp"
#include "fencekit/reference.hpp"
#include "fencekit/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using fencekit::CoordField;
using fencekit::ImageTensor;
using fencekit::RngStream;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

ImageTensor random_image(int side, int channels, RngStream& rng) {
  ImageTensor x(side, side, channels);
  for (float& v : x.data) v = float(rng.uniform());
  return x;
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(double(a.data[i]) - double(b.data[i])));
  return m;
}

void report(const char* name, double opt_ms, double ref_ms, double diff, double tol) {
  std::printf("%-22s optimized %8.3f ms   reference %9.3f ms   speedup %6.2fx   max|diff| %.2e %s\n",
              name, opt_ms, ref_ms, ref_ms / opt_ms, diff, diff <= tol ? "(ok)" : "(MISMATCH)");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled\n");
#endif
  RngStream rng(2024, "bench");
  const int side = 256;

  {  // Bilinear remap over a smooth random coordinate field.
    ImageTensor x = random_image(side, 3, rng);
    CoordField field(side, side);
    RngStream fr = rng.fork("field");
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        field.x[field.idx(i, j)] = j + 3.0 * std::sin(i * 0.05) + fr.uniform(-0.5, 0.5);
        field.y[field.idx(i, j)] = i + 3.0 * std::cos(j * 0.05) + fr.uniform(-0.5, 0.5);
      }
    ImageTensor opt = fencekit::remap(x, field, 0.0f);
    ImageTensor ref = fencekit::reference::remap_naive(x, field, 0.0f);
    double d = max_abs_diff(opt, ref);
    double t_opt = time_ms([&] { fencekit::remap(x, field, 0.0f); }, 20);
    double t_ref = time_ms([&] { fencekit::reference::remap_naive(x, field, 0.0f); }, 5);
    report("remap 256x256x3", t_opt, t_ref, d, 1e-5);
  }

  {  // Separable Gaussian blur vs dense 2-D convolution.
    ImageTensor x = random_image(side, 3, rng);
    const double sigma = 2.0;
    int ksize = 0;
    std::vector<double> kernel = fencekit::reference::gaussian_kernel_2d(sigma, &ksize);
    ImageTensor opt = fencekit::gaussian_blur(x, sigma);
    ImageTensor ref = fencekit::reference::conv2d_dense(x, kernel, ksize);
    double d = max_abs_diff(opt, ref);
    double t_opt = time_ms([&] { fencekit::gaussian_blur(x, sigma); }, 10);
    double t_ref = time_ms([&] { fencekit::reference::conv2d_dense(x, kernel, ksize); }, 2);
    report("gaussian blur s=2", t_opt, t_ref, d, 1e-5);
  }

  {  // Blockwise DCT quantization round trip vs quadruple-loop DCT.
    ImageTensor x = random_image(side, 1, rng);
    const fencekit::QuantTable luma = fencekit::scale_table(fencekit::std_luma_table(), 50);
    auto naive_roundtrip = [&](const ImageTensor& in) {
      ImageTensor out(in.height, in.width, 1);
      for (int by = 0; by < in.height; by += 8)
        for (int bx = 0; bx < in.width; bx += 8) {
          double block[64], coeff[64], rec[64];
          for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
              block[i * 8 + j] = double(in.at(by + i, bx + j, 0)) * 255.0 - 128.0;
          for (int u = 0; u < 8; ++u)
            for (int v = 0; v < 8; ++v) {
              double c = fencekit::reference::dct8_coeff(block, u, v);
              int q = luma[size_t(u) * 8 + v];
              coeff[u * 8 + v] = std::round(c / q) * q;
            }
          fencekit::reference::idct8_naive(coeff, rec);
          for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
              out.at(by + i, bx + j, 0) = float(std::clamp((rec[i * 8 + j] + 128.0) / 255.0, 0.0, 1.0));
        }
      return out;
    };
    ImageTensor opt = fencekit::jpeg_roundtrip(x, luma, luma);
    ImageTensor ref = naive_roundtrip(x);
    double d = max_abs_diff(opt, ref);
    double t_opt = time_ms([&] { fencekit::jpeg_roundtrip(x, luma, luma); }, 10);
    double t_ref = time_ms([&] { naive_roundtrip(x); }, 2);
    report("dct roundtrip q50", t_opt, t_ref, d, 1e-3);
  }

  {  // SSIM mean vs direct per-window evaluation.
    ImageTensor a = random_image(side, 1, rng);
    ImageTensor b = a;
    RngStream nr = rng.fork("ssim-noise");
    for (float& v : b.data) v = float(std::clamp(v + 0.02 * nr.normal(), 0.0, 1.0));
    double opt = fencekit::ssim(a, b);
    double ref = fencekit::reference::ssim_naive(a, b);
    double d = std::fabs(opt - ref);
    double t_opt = time_ms([&] { fencekit::ssim(a, b); }, 10);
    double t_ref = time_ms([&] { fencekit::reference::ssim_naive(a, b); }, 2);
    report("ssim 256x256", t_opt, t_ref, d, 1e-9);
  }

  {  // 3x3 image convolution vs dense reference.
    ImageTensor x = random_image(side, 3, rng);
    std::vector<double> kernel(9);
    double sum = 0;
    RngStream kr = rng.fork("kernel");
    for (double& k : kernel) sum += (k = kr.uniform(0.0, 1.0));
    for (double& k : kernel) k /= sum;
    ImageTensor opt = fencekit::convolve(x, kernel, 3);
    ImageTensor ref = fencekit::reference::conv2d_dense(x, kernel, 3);
    double d = max_abs_diff(opt, ref);
    double t_opt = time_ms([&] { fencekit::convolve(x, kernel, 3); }, 20);
    double t_ref = time_ms([&] { fencekit::reference::conv2d_dense(x, kernel, 3); }, 5);
    report("convolve 3x3", t_opt, t_ref, d, 1e-6);
  }

  return 0;
}
