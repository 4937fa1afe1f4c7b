#include "fencekit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fencekit {

AffineMap AffineMap::compose(const AffineMap& o) const {
  // this(o(p)) for p = (x, y).
  AffineMap m;
  m.a = a * o.a + b * o.c;
  m.b = a * o.b + b * o.d;
  m.tx = a * o.tx + b * o.ty + tx;
  m.c = c * o.a + d * o.c;
  m.d = c * o.b + d * o.d;
  m.ty = c * o.tx + d * o.ty + ty;
  return m;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * n;
  int m = ((i % period) + period) % period;
  return m < n ? m : period - 1 - m;
}

ImageTensor remap(const ImageTensor& x, const CoordField& field, float border) {
  if (field.height != x.height || field.width != x.width)
    throw std::invalid_argument("remap: field shape mismatch");
  for (size_t k = 0; k < field.x.size(); ++k)
    if (!std::isfinite(field.x[k]) || !std::isfinite(field.y[k]))
      throw std::invalid_argument("remap: non-finite coordinate");

  const int h = x.height, w = x.width, ch = x.channels;
  ImageTensor out(h, w, ch);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double sx = field.x[field.idx(i, j)];
      double sy = field.y[field.idx(i, j)];
      int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
      double fx = sx - x0, fy = sy - y0;
      bool in00 = y0 >= 0 && y0 < h && x0 >= 0 && x0 < w;
      bool in01 = y0 >= 0 && y0 < h && x0 + 1 >= 0 && x0 + 1 < w;
      bool in10 = y0 + 1 >= 0 && y0 + 1 < h && x0 >= 0 && x0 < w;
      bool in11 = y0 + 1 >= 0 && y0 + 1 < h && x0 + 1 >= 0 && x0 + 1 < w;
      for (int c = 0; c < ch; ++c) {
        double p00 = in00 ? x.at(y0, x0, c) : border;
        double p01 = in01 ? x.at(y0, x0 + 1, c) : border;
        double p10 = in10 ? x.at(y0 + 1, x0, c) : border;
        double p11 = in11 ? x.at(y0 + 1, x0 + 1, c) : border;
        out.at(i, j, c) =
            float((1 - fy) * ((1 - fx) * p00 + fx * p01) + fy * ((1 - fx) * p10 + fx * p11));
      }
    }
  }
  return out;
}

ImageTensor remap_affine(const ImageTensor& x, const AffineMap& m, float border) {
  CoordField f(x.height, x.width);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) {
      f.x[f.idx(i, j)] = m.a * j + m.b * i + m.tx;
      f.y[f.idx(i, j)] = m.c * j + m.d * i + m.ty;
    }
  return remap(x, f, border);
}

ImageTensor resize_bilinear(const ImageTensor& x, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bilinear: bad size");
  const int h = x.height, w = x.width, ch = x.channels;
  const double ry = double(h) / out_h, rx = double(w) / out_w;
  ImageTensor out(out_h, out_w, ch);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < out_h; ++i) {
    double sy = (i + 0.5) * ry - 0.5;
    int y0 = int(std::floor(sy));
    double fy = sy - y0;
    int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
    for (int j = 0; j < out_w; ++j) {
      double sx = (j + 0.5) * rx - 0.5;
      int x0 = int(std::floor(sx));
      double fx = sx - x0;
      int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
      for (int c = 0; c < ch; ++c) {
        double v = (1 - fy) * ((1 - fx) * x.at(ya, xa, c) + fx * x.at(ya, xb, c)) +
                   fy * ((1 - fx) * x.at(yb, xa, c) + fx * x.at(yb, xb, c));
        out.at(i, j, c) = float(v);
      }
    }
  }
  return out;
}

namespace {

std::vector<double> gaussian_kernel_1d(double sigma) {
  int r = int(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

ImageTensor gaussian_blur(const ImageTensor& x, double sigma) {
  if (sigma < 0) throw std::invalid_argument("gaussian_blur: negative sigma");
  if (sigma == 0) return x;
  auto k = gaussian_kernel_1d(sigma);
  int r = int(k.size() / 2);
  const int h = x.height, w = x.width, ch = x.channels;

  // horizontal pass into a double buffer, then vertical pass
  std::vector<double> tmp(x.data.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int t = -r; t <= r; ++t) acc += k[t + r] * x.at(i, reflect_index(j + t, w), c);
        tmp[(size_t(i) * w + j) * ch + c] = acc;
      }

  ImageTensor out(h, w, ch);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int t = -r; t <= r; ++t)
          acc += k[t + r] * tmp[(size_t(reflect_index(i + t, h)) * w + j) * ch + c];
        out.at(i, j, c) = float(std::clamp(acc, 0.0, 1.0));
      }
  return out;
}

void gaussian_blur_field(std::vector<double>& field, int h, int w, double sigma) {
  if (sigma <= 0) return;
  if (int(field.size()) != h * w) throw std::invalid_argument("gaussian_blur_field: bad shape");
  auto k = gaussian_kernel_1d(sigma);
  int r = int(k.size() / 2);
  std::vector<double> tmp(field.size());
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * field[size_t(i) * w + reflect_index(j + t, w)];
      tmp[size_t(i) * w + j] = acc;
    }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0;
      for (int t = -r; t <= r; ++t)
        acc += k[t + r] * tmp[size_t(reflect_index(i + t, h)) * w + j];
      field[size_t(i) * w + j] = acc;
    }
}

ImageTensor convolve(const ImageTensor& x, const std::vector<double>& kernel, int ksize) {
  if (int(kernel.size()) != ksize * ksize || ksize % 2 == 0)
    throw std::invalid_argument("convolve: kernel must be odd square");
  int r = ksize / 2;
  const int h = x.height, w = x.width, ch = x.channels;
  ImageTensor out(h, w, ch);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += kernel[(dy + r) * ksize + (dx + r)] *
                   x.at(reflect_index(i + dy, h), reflect_index(j + dx, w), c);
        out.at(i, j, c) = float(acc);
      }
  return out;
}

}  // namespace fencekit
