#include "fencekit/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace fencekit {

namespace {

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* who) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

}  // namespace

double l2_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "l2_distance");
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = double(a.data[i]) - double(b.data[i]);
    acc += d * d;
  }
  return std::sqrt(acc) / double(a.data.size());
}

double linf_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "linf_distance");
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
  return m;
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr");
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = double(a.data[i]) - double(b.data[i]);
    acc += d * d;
  }
  double mse = acc / double(a.data.size());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim");
  const int w = 8;
  if (a.height < w || a.width < w) throw std::invalid_argument("ssim: image smaller than 8x8");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const double n = double(w) * w;

  double total = 0;
  long windows = 0;
  // Per channel: sliding 8x8 sums via a per-row running update.
  for (int c = 0; c < a.channels; ++c) {
    for (int i = 0; i + w <= a.height; ++i) {
      for (int j = 0; j + w <= a.width; ++j) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < w; ++y)
          for (int x = 0; x < w; ++x) {
            double va = a.at(i + y, j + x, c);
            double vb = b.at(i + y, j + x, c);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
          }
        double ma = sa / n, mb = sb / n;
        double va = saa / n - ma * ma;
        double vb = sbb / n - mb * mb;
        double cov = sab / n - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
    }
  }
  return total / double(windows);
}

}  // namespace fencekit
