#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fencekit/distortion.hpp"
#include "fencekit/metrics.hpp"
#include "fencekit/reference.hpp"

using namespace fencekit;

namespace {

// High-contrast structured image ("natural" stand-in): checkerboard blocks,
// a gradient and a bright disk.
ImageTensor natural_image(int h, int w, int c, uint64_t seed = 0) {
  ImageTensor x(h, w, c);
  RngStream r(seed);
  double jitter = r.uniform(0.0, 0.1);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double v = ((i / 4 + j / 4) % 2) ? 0.85 : 0.15;
      v += 0.1 * double(j) / w + jitter;
      double dy = i - h / 2.0, dx = j - w / 2.0;
      if (dy * dy + dx * dx < (h / 4.0) * (h / 4.0)) v = 0.95;
      for (int k = 0; k < c; ++k) x.at(i, j, k) = float(std::clamp(v - 0.03 * k, 0.0, 1.0));
    }
  return x;
}

void check_close(const ImageTensor& a, const ImageTensor& b, double tol) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
  CHECK(m <= tol);
}

void check_shape_range(const ImageTensor& out, const ImageTensor& in) {
  REQUIRE(out.same_shape(in));
  for (float v : out.data) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
}

template <typename Spec, typename Fn>
void common_properties(const Spec& spec, Fn&& apply, int h = 32, int w = 32) {
  auto x = natural_image(h, w, 3);
  // shape and range over random inputs and seeds
  for (uint64_t s = 0; s < 100; ++s) {
    RngStream r(s);
    auto img = natural_image(h, w, 3, s);
    auto out = apply(spec, img, r);
    check_shape_range(out, img);
  }
  // determinism: identical (spec, image, seed) -> bit-equal
  RngStream r1(77), r2(77);
  auto o1 = apply(spec, x, r1);
  auto o2 = apply(spec, x, r2);
  CHECK(o1.data == o2.data);
  // stochasticity: different seeds almost always differ
  int nonzero = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    RngStream a(2 * s + 1), b(2 * s + 2);
    auto oa = apply(spec, x, a);
    auto ob = apply(spec, x, b);
    if (l2_distance(oa, ob) > 0) ++nonzero;
  }
  CHECK(nonzero >= 99);
  // visible distortion on structured content
  double mean_l2 = 0;
  auto small = natural_image(16, 16, 1);
  for (uint64_t s = 0; s < 100; ++s) {
    RngStream r(1000 + s);
    mean_l2 += l2_distance(small, apply(spec, small, r));
  }
  CHECK(mean_l2 / 100 > 0.01);
}

}  // namespace

// --------------------------------------------------------------------- SAT

TEST_CASE("sat: zero parameters give the input back bit-exact") {
  auto x = natural_image(20, 24, 3);
  SatSpec s{0.0, 0.0, 0.0};
  RngStream r(3);
  auto out = apply_sat(s, x, r);
  CHECK(out.data == x.data);
}

TEST_CASE("sat: fixed seed matches the three-step map-composition oracle") {
  auto x = natural_image(32, 32, 3);
  SatSpec s;  // defaults
  RngStream r(42);
  auto got = apply_sat(s, x, r);

  // oracle: replay the draws, compose the three coordinate maps pointwise
  RngStream q(42);
  double dy = q.uniform(-s.translate, s.translate) * x.height;
  double dx = q.uniform(-s.translate, s.translate) * x.width;
  double angle = q.uniform(-s.rotate, s.rotate) * M_PI / 180.0;
  double scale = q.uniform(1.0 - s.scale, 1.0 + s.scale);
  double cx = (x.width - 1) / 2.0, cy = (x.height - 1) / 2.0;
  CoordField f(x.height, x.width);
  for (int i = 0; i < x.height; ++i)
    for (int j = 0; j < x.width; ++j) {
      double qx = cx + (j - cx) / scale;  // scale step
      double qy = cy + (i - cy) / scale;
      double rx = cx + std::cos(-angle) * (qx - cx) - std::sin(-angle) * (qy - cy);  // rotate
      double ry = cy + std::sin(-angle) * (qx - cx) + std::cos(-angle) * (qy - cy);
      f.x[f.idx(i, j)] = rx + dx;  // translate
      f.y[f.idx(i, j)] = ry + dy;
    }
  auto want = reference::remap_naive(x, f, 0.0f);
  check_close(got, want, 1e-6);
}

TEST_CASE("sat: common properties") {
  common_properties(SatSpec{}, [](const SatSpec& s, const ImageTensor& x, RngStream& r) {
    return apply_sat(s, x, r);
  });
}

TEST_CASE("sat: rejects out-of-range parameters") {
  auto x = natural_image(16, 16, 1);
  RngStream r(0);
  CHECK_THROWS(apply_sat(SatSpec{-0.1, 4, 0.16}, x, r));
  CHECK_THROWS(apply_sat(SatSpec{0.16, 4, 1.0}, x, r));
}

// -------------------------------------------------------------------- RSCA

TEST_CASE("rsca: full-frame limit is an identity within 1e-6") {
  auto x = natural_image(24, 24, 3);
  RscaSpec s{1.0, 1.0};
  RngStream r(5);
  auto out = apply_rsca(s, x, r);
  check_close(out, x, 1e-6);
}

TEST_CASE("rsca: fixed seed matches the slice-and-resize oracle") {
  auto x = natural_image(32, 32, 3);
  RscaSpec s;  // theta 0.66, eta 0.91
  RngStream r(99);
  auto got = apply_rsca(s, x, r);

  RngStream q(99);
  int h_new = int(std::floor(q.uniform(s.theta * x.height, double(x.height))));
  int w_new = int(std::floor(h_new * s.eta));
  int y1 = int(std::floor((x.height - h_new) * q.uniform()));
  int x1 = int(std::floor((x.width - w_new) * q.uniform()));
  ImageTensor crop(h_new, w_new, 3);
  for (int i = 0; i < h_new; ++i)
    for (int j = 0; j < w_new; ++j)
      for (int c = 0; c < 3; ++c) crop.at(i, j, c) = x.at(y1 + i, x1 + j, c);
  auto want = reference::resize_naive(crop, 32, 32);
  check_close(got, want, 1e-6);
}

TEST_CASE("rsca: common properties") {
  common_properties(RscaSpec{}, [](const RscaSpec& s, const ImageTensor& x, RngStream& r) {
    return apply_rsca(s, x, r);
  });
}

TEST_CASE("rsca: degenerate crop throws") {
  auto x = natural_image(8, 8, 1);
  RngStream r(0);
  CHECK_THROWS(apply_rsca(RscaSpec{0.2, 0.91}, x, r));
}

// -------------------------------------------------------------------- RSPA

TEST_CASE("rspa: lambda just above 1 is an identity within 1e-6") {
  auto x = natural_image(32, 32, 3);
  RspaSpec s{1.0000001};
  RngStream r(8);
  auto out = apply_rspa(s, x, r);
  check_close(out, x, 1e-6);
}

TEST_CASE("rspa: fixed seed matches the resize-pad-resize oracle") {
  auto x = natural_image(32, 32, 3);
  RspaSpec s;  // lambda 1.3
  RngStream r(4242);
  auto got = apply_rspa(s, x, r);

  RngStream q(4242);
  int canvas_side = int(std::floor(s.lambda * x.height));
  int new_side = int(q.uniform_int(x.height, canvas_side));
  auto resized = reference::resize_naive(x, new_side, new_side);
  ImageTensor canvas(canvas_side, canvas_side, 3, 0.5f);
  int oy = int(q.uniform_int(0, canvas_side - new_side));
  int ox = int(q.uniform_int(0, canvas_side - new_side));
  for (int i = 0; i < new_side; ++i)
    for (int j = 0; j < new_side; ++j)
      for (int c = 0; c < 3; ++c) canvas.at(oy + i, ox + j, c) = resized.at(i, j, c);
  auto want = reference::resize_naive(canvas, 32, 32);
  check_close(got, want, 1e-6);
}

TEST_CASE("rspa: common properties") {
  common_properties(RspaSpec{}, [](const RspaSpec& s, const ImageTensor& x, RngStream& r) {
    return apply_rspa(s, x, r);
  });
}

TEST_CASE("rspa: lambda <= 1 throws") {
  auto x = natural_image(16, 16, 1);
  RngStream r(0);
  CHECK_THROWS(apply_rspa(RspaSpec{1.0}, x, r));
  CHECK_THROWS(apply_rspa(RspaSpec{0.9}, x, r));
}

// --------------------------------------------------------------------- SET

TEST_CASE("set: zero jitter and zero amplitude give the input back bit-exact") {
  auto x = natural_image(32, 32, 3);
  SetSpec s{0.0, 10.0, 0.0};
  RngStream r(6);
  auto out = apply_set(s, x, r);
  CHECK(out.data == x.data);
}

TEST_CASE("set: fixed seed matches the two-stage oracle") {
  auto x = natural_image(32, 32, 3);
  SetSpec s;  // defaults, rescaled internally by 32/299
  RngStream r(1717);
  auto got = apply_set(s, x, r);

  // oracle: replay draws; solve the forward affine and invert it; blur the
  // fields with the dense reference kernel.
  RngStream q(1717);
  double sc = 32.0 / 299.0;
  double theta = s.theta * sc, sigma = s.sigma * sc, alpha = s.alpha * sc;
  double px[3] = {8.0, 24.0, 8.0}, py[3] = {8.0, 8.0, 24.0};
  double qx[3], qy[3];
  for (int k = 0; k < 3; ++k) {
    qx[k] = px[k] + q.uniform(-theta, theta);
    qy[k] = py[k] + q.uniform(-theta, theta);
  }
  // forward map sends p -> q; build it, then invert the 2x2 part.
  // Solve forward coefficients A p + t = q via the two triangles' edges.
  double e1x = px[1] - px[0], e1y = py[1] - py[0];
  double e2x = px[2] - px[0], e2y = py[2] - py[0];
  double f1x = qx[1] - qx[0], f1y = qy[1] - qy[0];
  double f2x = qx[2] - qx[0], f2y = qy[2] - qy[0];
  double det = e1x * e2y - e1y * e2x;
  double a = (f1x * e2y - f2x * e1y) / det;
  double b = (f2x * e1x - f1x * e2x) / det;
  double c = (f1y * e2y - f2y * e1y) / det;
  double d = (f2y * e1x - f1y * e2x) / det;
  double tx = qx[0] - a * px[0] - b * py[0];
  double ty = qy[0] - c * px[0] - d * py[0];
  double idet = a * d - b * c;
  double ia = d / idet, ib = -b / idet, ic = -c / idet, id = a / idet;

  CoordField f1(32, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      double ux = j - tx, uy = i - ty;
      f1.x[f1.idx(i, j)] = ia * ux + ib * uy;
      f1.y[f1.idx(i, j)] = ic * ux + id * uy;
    }
  auto warped = reference::remap_naive(x, f1, 0.0f);

  ImageTensor fx(32, 32, 1), fy(32, 32, 1);
  for (auto& v : fx.data) v = float(q.uniform(-1.0, 1.0));
  for (auto& v : fy.data) v = float(q.uniform(-1.0, 1.0));
  int k = 0;
  auto kern = reference::gaussian_kernel_2d(sigma, &k);
  auto bx = reference::conv2d_dense(fx, kern, k);
  auto by = reference::conv2d_dense(fy, kern, k);
  CoordField f2(32, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      f2.x[f2.idx(i, j)] = j + alpha * bx.at(i, j, 0);
      f2.y[f2.idx(i, j)] = i + alpha * by.at(i, j, 0);
    }
  auto want = reference::remap_naive(warped, f2, 0.0f);
  check_close(got, want, 1e-5);
}

TEST_CASE("set: displacement field statistics stay within alpha") {
  // theta = 0 so only the smooth warp acts; the field is bounded by alpha'.
  auto x = natural_image(64, 64, 1);
  SetSpec s{0.0, 10.0, 60.0};
  double alpha_resolved = 60.0 * 64.0 / 299.0;
  RngStream r(11);
  auto out = apply_set(s, x, r);
  check_shape_range(out, x);

  // replay the field draws and verify the mean absolute displacement
  RngStream q(11);
  for (int k = 0; k < 6; ++k) (void)q.uniform();  // stage-1 jitter draws
  std::vector<double> fx(64 * 64), fy(64 * 64);
  for (auto& v : fx) v = q.uniform(-1.0, 1.0);
  for (auto& v : fy) v = q.uniform(-1.0, 1.0);
  gaussian_blur_field(fx, 64, 64, 10.0 * 64.0 / 299.0);
  double mean_abs = 0;
  for (double v : fx) mean_abs += std::abs(v) * alpha_resolved;
  mean_abs /= fx.size();
  CHECK(mean_abs <= alpha_resolved);
  CHECK(mean_abs > 0.0);
}

TEST_CASE("set: common properties") {
  common_properties(SetSpec{}, [](const SetSpec& s, const ImageTensor& x, RngStream& r) {
    return apply_set(s, x, r);
  });
}

// --------------------------------------------------------------------- RDG

TEST_CASE("rdg: zero delta is an identity within 1e-6") {
  auto x = natural_image(32, 32, 3);
  RdgSpec s{26, 0.0};
  RngStream r(13);
  auto out = apply_rdg(s, x, r);
  check_close(out, x, 1e-6);
}

TEST_CASE("rdg: checkerboard fixed seed matches the cumulative-stretch oracle") {
  ImageTensor x(32, 32, 1);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) x.at(i, j, 0) = ((i / 4 + j / 4) % 2) ? 1.0f : 0.0f;
  RdgSpec s;  // d=26 -> d'=3 at side 32, delta 0.33
  RngStream r(2024);
  auto got = apply_rdg(s, x, r);

  RngStream q(2024);
  int d = std::max(2, int(std::lround(26.0 * 32.0 / 299.0)));
  REQUIRE(d == 3);
  auto axis = [&](int n) {
    std::vector<double> st(d);
    for (int k = 0; k < d; ++k) st[k] = 1.0 + q.uniform(-s.delta, s.delta);
    double base = double(n) / d;
    std::vector<double> cum(d + 1, 0);
    for (int k = 0; k < d; ++k) cum[k + 1] = cum[k] + base * st[k];
    double norm = n / cum[d];
    std::vector<double> u(n);
    for (int t = 0; t < n; ++t) {
      int k = std::min(int(t / base), d - 1);
      u[t] = (cum[k] + (t - k * base) * st[k]) * norm;
    }
    return u;
  };
  auto ux = axis(32), uy = axis(32);
  CoordField f(32, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      f.x[f.idx(i, j)] = ux[j];
      f.y[f.idx(i, j)] = uy[i];
    }
  auto want = reference::remap_naive(x, f, 0.0f);
  check_close(got, want, 1e-6);
}

TEST_CASE("rdg: common properties") {
  common_properties(RdgSpec{}, [](const RdgSpec& s, const ImageTensor& x, RngStream& r) {
    return apply_rdg(s, x, r);
  });
}

TEST_CASE("rdg: too-fine grid throws") {
  auto x = natural_image(8, 8, 1);
  RngStream r(0);
  CHECK_THROWS(apply_rdg(RdgSpec{170, 0.33}, x, r));
}

// ------------------------------------------------- distortion, not inversion

TEST_CASE("no fixed affine candidate reconstructs the distorted image") {
  // Composing with any of a family of affine maps cannot recover even half
  // of the distortion, i.e. the transforms are not secretly invertible.
  auto x = natural_image(16, 16, 1);
  std::vector<AffineMap> candidates;
  candidates.push_back(AffineMap::identity());
  for (double s : {0.9, 1.1}) {
    AffineMap m;
    m.a = m.d = 1.0 / s;
    m.tx = 7.5 * (1 - 1.0 / s);
    m.ty = 7.5 * (1 - 1.0 / s);
    candidates.push_back(m);
  }
  for (double deg : {-3.0, 3.0}) {
    AffineMap m;
    double t = deg * M_PI / 180.0;
    m.a = std::cos(t), m.b = -std::sin(t), m.c = std::sin(t), m.d = std::cos(t);
    m.tx = 7.5 - m.a * 7.5 - m.b * 7.5;
    m.ty = 7.5 - m.c * 7.5 - m.d * 7.5;
    candidates.push_back(m);
  }
  for (double dx : {-1.0, 1.0}) {
    AffineMap m;
    m.tx = dx;
    candidates.push_back(m);
  }

  auto run = [&](auto&& apply) {
    std::vector<double> dist, best;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      RngStream r(seed);
      auto y = apply(x, r);
      dist.push_back(l2_distance(x, y));
      double mn = 1e9;
      for (const auto& m : candidates) mn = std::min(mn, l2_distance(x, remap_affine(y, m, 0.0f)));
      best.push_back(mn);
    }
    std::sort(dist.begin(), dist.end());
    std::sort(best.begin(), best.end());
    CHECK(best[best.size() / 2] >= 0.5 * dist[dist.size() / 2]);
  };
  run([](const ImageTensor& img, RngStream& r) {
    SatSpec s;
    return apply_sat(s, img, r);
  });
  run([](const ImageTensor& img, RngStream& r) {
    RdgSpec s;
    return apply_rdg(s, img, r);
  });
  run([](const ImageTensor& img, RngStream& r) {
    SetSpec s;
    return apply_set(s, img, r);
  });
}
