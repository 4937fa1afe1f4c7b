#include "fencekit/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fencekit {

namespace {

constexpr double kRefSide = 299.0;

double side_scale(const ImageTensor& x) { return double(std::min(x.height, x.width)) / kRefSide; }

}  // namespace

ImageTensor apply_sat(const SatSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.translate < 0 || s.rotate < 0 || s.scale < 0 || s.scale >= 1)
    throw std::invalid_argument("SAT: parameters out of range");

  double dy = rng.uniform(-s.translate, s.translate) * x.height;
  double dx = rng.uniform(-s.translate, s.translate) * x.width;
  double angle = rng.uniform(-s.rotate, s.rotate) * M_PI / 180.0;
  double scale = rng.uniform(1.0 - s.scale, 1.0 + s.scale);

  const double cx = (x.width - 1) / 2.0, cy = (x.height - 1) / 2.0;

  // One fused inverse map: p -> scale^-1 -> rotate^-1 -> translate^-1.
  AffineMap sinv;
  sinv.a = 1.0 / scale;
  sinv.d = 1.0 / scale;
  sinv.tx = cx * (1.0 - 1.0 / scale);
  sinv.ty = cy * (1.0 - 1.0 / scale);

  AffineMap rinv;
  double ca = std::cos(-angle), sa = std::sin(-angle);
  rinv.a = ca;
  rinv.b = -sa;
  rinv.c = sa;
  rinv.d = ca;
  rinv.tx = cx - ca * cx + sa * cy;
  rinv.ty = cy - sa * cx - ca * cy;

  AffineMap tinv;
  tinv.tx = dx;
  tinv.ty = dy;

  AffineMap total = tinv.compose(rinv.compose(sinv));
  return remap_affine(x, total, 0.0f);
}

ImageTensor apply_rsca(const RscaSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.theta <= 0 || s.theta > 1 || s.eta <= 0 || s.eta > 1)
    throw std::invalid_argument("RSCA: parameters out of range");
  if (int(std::floor(s.theta * x.height)) < 2)
    throw std::invalid_argument("RSCA: crop would be degenerate");

  int h_new = int(std::floor(rng.uniform(s.theta * x.height, double(x.height))));
  h_new = std::clamp(h_new, 2, x.height);
  int w_new = std::clamp(int(std::floor(h_new * s.eta)), 2, x.width);
  int y1 = int(std::floor((x.height - h_new) * rng.uniform()));
  int x1 = int(std::floor((x.width - w_new) * rng.uniform()));

  ImageTensor crop(h_new, w_new, x.channels);
  for (int i = 0; i < h_new; ++i)
    for (int j = 0; j < w_new; ++j)
      for (int c = 0; c < x.channels; ++c) crop.at(i, j, c) = x.at(y1 + i, x1 + j, c);
  return resize_bilinear(crop, x.height, x.width);
}

ImageTensor apply_rspa(const RspaSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.lambda <= 1.0) throw std::invalid_argument("RSPA: lambda must be > 1");

  int canvas_side = int(std::floor(s.lambda * x.height));
  int new_side = int(rng.uniform_int(x.height, canvas_side));
  ImageTensor resized = resize_bilinear(x, new_side, new_side);

  ImageTensor canvas(canvas_side, canvas_side, x.channels, 0.5f);
  int oy = int(rng.uniform_int(0, canvas_side - new_side));
  int ox = int(rng.uniform_int(0, canvas_side - new_side));
  for (int i = 0; i < new_side; ++i)
    for (int j = 0; j < new_side; ++j)
      for (int c = 0; c < x.channels; ++c) canvas.at(oy + i, ox + j, c) = resized.at(i, j, c);
  return resize_bilinear(canvas, x.height, x.width);
}

namespace {

// Solve the affine map sending (from1,from2,from3) to (to1,to2,to3);
// returns false when the source triangle is degenerate.
bool solve_affine(const double fx[3], const double fy[3], const double tx[3], const double ty[3],
                  AffineMap* out) {
  double det = fx[0] * (fy[1] - fy[2]) - fy[0] * (fx[1] - fx[2]) + (fx[1] * fy[2] - fx[2] * fy[1]);
  if (std::abs(det) < 1e-9) return false;
  auto solve_row = [&](const double t[3], double* a, double* b, double* c) {
    *a = (t[0] * (fy[1] - fy[2]) - fy[0] * (t[1] - t[2]) + (t[1] * fy[2] - t[2] * fy[1])) / det;
    *b = (fx[0] * (t[1] - t[2]) - t[0] * (fx[1] - fx[2]) + (fx[1] * t[2] - fx[2] * t[1])) / det;
    *c = (fx[0] * (fy[1] * t[2] - fy[2] * t[1]) - fy[0] * (fx[1] * t[2] - fx[2] * t[1]) +
          t[0] * (fx[1] * fy[2] - fx[2] * fy[1])) /
         det;
  };
  solve_row(tx, &out->a, &out->b, &out->tx);
  solve_row(ty, &out->c, &out->d, &out->ty);
  return true;
}

}  // namespace

ImageTensor apply_set(const SetSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.theta < 0 || s.sigma < 0 || s.alpha < 0)
    throw std::invalid_argument("SET: parameters out of range");
  double sc = side_scale(x);
  double theta = s.theta * sc, sigma = s.sigma * sc, alpha = s.alpha * sc;

  const double px[3] = {x.width / 4.0, 3.0 * x.width / 4.0, x.width / 4.0};
  const double py[3] = {x.height / 4.0, x.height / 4.0, 3.0 * x.height / 4.0};

  // Stage 1: jittered control points -> global affine (solved from the
  // perturbed points back to the originals, i.e. directly the inverse map).
  AffineMap stage1 = AffineMap::identity();
  for (int attempt = 0; attempt < 10; ++attempt) {
    double qx[3], qy[3];
    for (int k = 0; k < 3; ++k) {
      qx[k] = px[k] + rng.uniform(-theta, theta);
      qy[k] = py[k] + rng.uniform(-theta, theta);
    }
    if (solve_affine(qx, qy, px, py, &stage1)) break;
    stage1 = AffineMap::identity();
  }
  ImageTensor warped = remap_affine(x, stage1, 0.0f);

  // Stage 2: smoothed random displacement fields scaled by alpha.
  size_t n = size_t(x.height) * x.width;
  std::vector<double> fx(n), fy(n);
  for (auto& v : fx) v = rng.uniform(-1.0, 1.0);
  for (auto& v : fy) v = rng.uniform(-1.0, 1.0);
  gaussian_blur_field(fx, x.height, x.width, sigma);
  gaussian_blur_field(fy, x.height, x.width, sigma);

  CoordField f(x.height, x.width);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) {
      f.x[f.idx(i, j)] = j + alpha * fx[f.idx(i, j)];
      f.y[f.idx(i, j)] = i + alpha * fy[f.idx(i, j)];
    }
  return remap(warped, f, 0.0f);
}

ImageTensor apply_rdg(const RdgSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.d < 2 || s.delta < 0 || s.delta >= 1)
    throw std::invalid_argument("RDG: parameters out of range");
  int d = std::max(2, int(std::lround(s.d * side_scale(x))));
  if (x.height / d < 2 || x.width / d < 2)
    throw std::invalid_argument("RDG: grid cell smaller than 2 pixels");

  // Per axis: stretch every cell by 1 + U(-delta, delta), accumulate spans
  // from the origin, renormalize so the final span equals the side again.
  auto axis_map = [&](int n) {
    std::vector<double> stretch(d);
    for (int k = 0; k < d; ++k) stretch[k] = 1.0 + rng.uniform(-s.delta, s.delta);
    double base = double(n) / d;
    std::vector<double> cum(d + 1, 0.0);
    for (int k = 0; k < d; ++k) cum[k + 1] = cum[k] + base * stretch[k];
    double norm = double(n) / cum[d];
    std::vector<double> coord(n);
    for (int t = 0; t < n; ++t) {
      int k = std::min(int(t / base), d - 1);
      coord[t] = (cum[k] + (t - k * base) * stretch[k]) * norm;
    }
    return coord;
  };

  std::vector<double> ux = axis_map(x.width);
  std::vector<double> uy = axis_map(x.height);

  CoordField f(x.height, x.width);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) {
      f.x[f.idx(i, j)] = ux[j];
      f.y[f.idx(i, j)] = uy[i];
    }
  return remap(x, f, 0.0f);
}

}  // namespace fencekit
