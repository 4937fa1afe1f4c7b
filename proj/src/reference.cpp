#include "fencekit/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace fencekit::reference {

namespace {

// Half-sample reflection: ..., x1, x0 | x0, x1, ...
int reflect(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n;
  int m = ((i % period) + period) % period;
  return m < n ? m : period - 1 - m;
}

}  // namespace

ImageTensor remap_naive(const ImageTensor& x, const CoordField& field, float border) {
  ImageTensor out(x.height, x.width, x.channels);
  for (int i = 0; i < x.height; ++i) {
    for (int j = 0; j < x.width; ++j) {
      double sx = field.x[field.idx(i, j)];
      double sy = field.y[field.idx(i, j)];
      int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
      double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < x.channels; ++c) {
        auto tap = [&](int yy, int xx) -> double {
          if (yy < 0 || yy >= x.height || xx < 0 || xx >= x.width) return border;
          return x.at(yy, xx, c);
        };
        double v = (1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
                   fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
        out.at(i, j, c) = float(v);
      }
    }
  }
  return out;
}

ImageTensor resize_naive(const ImageTensor& x, int out_h, int out_w) {
  ImageTensor out(out_h, out_w, x.channels);
  double ry = double(x.height) / out_h, rx = double(x.width) / out_w;
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      double sy = (i + 0.5) * ry - 0.5;
      double sx = (j + 0.5) * rx - 0.5;
      int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
      double fy = sy - y0, fx = sx - x0;
      auto cl = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
      for (int c = 0; c < x.channels; ++c) {
        double p00 = x.at(cl(y0, x.height), cl(x0, x.width), c);
        double p01 = x.at(cl(y0, x.height), cl(x0 + 1, x.width), c);
        double p10 = x.at(cl(y0 + 1, x.height), cl(x0, x.width), c);
        double p11 = x.at(cl(y0 + 1, x.height), cl(x0 + 1, x.width), c);
        out.at(i, j, c) = float((1 - fy) * ((1 - fx) * p00 + fx * p01) +
                                fy * ((1 - fx) * p10 + fx * p11));
      }
    }
  }
  return out;
}

ImageTensor conv2d_dense(const ImageTensor& x, const std::vector<double>& kernel, int ksize) {
  if (int(kernel.size()) != ksize * ksize || ksize % 2 == 0)
    throw std::invalid_argument("conv2d_dense: bad kernel");
  int r = ksize / 2;
  ImageTensor out(x.height, x.width, x.channels);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j)
      for (int c = 0; c < x.channels; ++c) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += kernel[(dy + r) * ksize + (dx + r)] *
                   x.at(reflect(i + dy, x.height), reflect(j + dx, x.width), c);
        out.at(i, j, c) = float(acc);
      }
  return out;
}

std::vector<double> gaussian_kernel_2d(double sigma, int* ksize) {
  int r = int(std::ceil(4.0 * sigma));
  int k = 2 * r + 1;
  std::vector<double> one(k);
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    one[i + r] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
    sum += one[i + r];
  }
  for (double& v : one) v /= sum;
  std::vector<double> kern(size_t(k) * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) kern[size_t(i) * k + j] = one[i] * one[j];
  *ksize = k;
  return kern;
}

double dct8_coeff(const double block[64], int u, int v) {
  auto cu = [](int t) { return t == 0 ? 1.0 / std::sqrt(2.0) : 1.0; };
  double acc = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      acc += block[i * 8 + j] * std::cos((2 * i + 1) * u * M_PI / 16.0) *
             std::cos((2 * j + 1) * v * M_PI / 16.0);
  return 0.25 * cu(u) * cu(v) * acc;
}

void idct8_naive(const double coeff[64], double out[64]) {
  auto cu = [](int t) { return t == 0 ? 1.0 / std::sqrt(2.0) : 1.0; };
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double acc = 0;
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v)
          acc += cu(u) * cu(v) * coeff[u * 8 + v] * std::cos((2 * i + 1) * u * M_PI / 16.0) *
                 std::cos((2 * j + 1) * v * M_PI / 16.0);
      out[i * 8 + j] = 0.25 * acc;
    }
}

double ssim_naive(const ImageTensor& a, const ImageTensor& b) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int w = 8;
  double total = 0;
  long count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int i = 0; i + w <= a.height; ++i)
      for (int j = 0; j + w <= a.width; ++j) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < w; ++y)
          for (int x = 0; x < w; ++x) {
            double va = a.at(i + y, j + x, c), vb = b.at(i + y, j + x, c);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
          }
        double n = w * w;
        double ma = sa / n, mb = sb / n;
        double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / double(count);
}

void conv3x3_naive(const std::vector<double>& in, int side, int cin, const std::vector<double>& w,
                   const std::vector<double>& b, int cout, std::vector<double>& out) {
  out.assign(size_t(cout) * side * side, 0.0);
  for (int oc = 0; oc < cout; ++oc)
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        double acc = b[oc];
        for (int ic = 0; ic < cin; ++ic)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              int y = i + dy, x = j + dx;
              if (y < 0 || y >= side || x < 0 || x >= side) continue;
              acc += w[((size_t(oc) * cin + ic) * 3 + (dy + 1)) * 3 + (dx + 1)] *
                     in[(size_t(ic) * side + y) * side + x];
            }
        out[(size_t(oc) * side + i) * side + j] = acc;
      }
}

}  // namespace fencekit::reference
