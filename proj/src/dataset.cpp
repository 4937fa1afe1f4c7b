#include "fencekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fencekit/geometry.hpp"

namespace fencekit {

namespace {

// Glyph membership in its unit frame: |u|, |v| <= 1 is the glyph extent,
// v grows downwards (image rows).  The ten classes are chosen so that they
// differ in coarse mass layout (orientation, asymmetry, hole/blob structure)
// rather than in fine edges, which keeps them distinguishable under blur,
// cropping, and local pixel shuffling.
bool glyph_hit(int class_id, double u, double v) {
  double r2 = u * u + v * v;
  switch (class_id) {
    case 0:  // disk
      return r2 <= 1.0;
    case 1:  // ring (wide hole)
      return r2 <= 1.0 && r2 >= 0.58 * 0.58;
    case 2:  // horizontal bar
      return std::fabs(v) <= 0.36 && std::fabs(u) <= 1.0;
    case 3:  // vertical bar
      return std::fabs(u) <= 0.36 && std::fabs(v) <= 1.0;
    case 4: {  // diagonal bar at +45 degrees
      double vr = (u - v) * 0.70710678118654752;
      double ur = (u + v) * 0.70710678118654752;
      return std::fabs(vr) <= 0.36 && std::fabs(ur) <= 1.0;
    }
    case 5:  // plus
      return (std::fabs(u) <= 0.33 && std::fabs(v) <= 1.0) ||
             (std::fabs(v) <= 0.33 && std::fabs(u) <= 1.0);
    case 6: {  // triangle, apex up (mass at the bottom)
      if (v < -1.0 || v > 0.75) return false;
      double half = 0.95 * (v + 1.0) / 1.75;  // width grows linearly to the base
      return std::fabs(u) <= half;
    }
    case 7:  // upper half-disk (mass at the top)
      return r2 <= 1.0 && v <= 0.0;
    case 8: {  // horizontal dumbbell: two blobs left and right
      double du = std::fabs(u) - 0.58;
      return du * du + v * v <= 0.40 * 0.40;
    }
    default: {  // vertical dumbbell: two blobs up and down
      double dv = std::fabs(v) - 0.58;
      return dv * dv + u * u <= 0.40 * 0.40;
    }
  }
}

}  // namespace

ImageTensor render_shape(int class_id, int side, int channels, RngStream& rng) {
  if (class_id < 0 || class_id > 9) throw std::invalid_argument("render_shape: class_id in 0..9");
  if (side < 8) throw std::invalid_argument("render_shape: side >= 8");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("render_shape: channels must be 1 or 3");

  // Pose and photometry draws, in pinned order.
  double cy = side * (0.5 + rng.uniform(-0.08, 0.08));
  double cx = side * (0.5 + rng.uniform(-0.08, 0.08));
  double radius = side * rng.uniform(0.29, 0.40);
  double angle = rng.uniform(-0.15, 0.15);
  double fg = rng.uniform(0.7, 1.0);
  double bg = rng.uniform(0.05, 0.25);
  double fg_tint[3] = {1.0, 1.0, 1.0}, bg_tint[3] = {1.0, 1.0, 1.0};
  if (channels == 3) {
    for (double& t : fg_tint) t = 1.0 + rng.uniform(-0.15, 0.15);
    for (double& t : bg_tint) t = 1.0 + rng.uniform(-0.15, 0.15);
  }
  double blur_sigma = rng.uniform(0.0, 0.8) * side / 32.0;
  double noise_sigma = rng.uniform(0.01, 0.03);

  double ca = std::cos(angle), sa = std::sin(angle);
  const int ss = 4;  // supersampling factor per axis
  ImageTensor img(side, side, channels);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      int hits = 0;
      for (int a = 0; a < ss; ++a)
        for (int b = 0; b < ss; ++b) {
          double y = i + (a + 0.5) / ss - cy;
          double x = j + (b + 0.5) / ss - cx;
          double u = (x * ca + y * sa) / radius;
          double v = (-x * sa + y * ca) / radius;
          if (glyph_hit(class_id, u, v)) ++hits;
        }
      double cover = double(hits) / (ss * ss);
      for (int k = 0; k < channels; ++k) {
        double f = std::clamp(fg * fg_tint[k], 0.0, 1.0);
        double g = std::clamp(bg * bg_tint[k], 0.0, 1.0);
        img.at(i, j, k) = float(g + cover * (f - g));
      }
    }

  img = gaussian_blur(img, blur_sigma);
  for (float& v : img.data) v += float(noise_sigma * rng.normal());
  clip_unit(img);
  return img;
}

Dataset make_shape_dataset(const ShapeSetOptions& opt) {
  if (opt.num_classes < 2 || opt.num_classes > 10)
    throw std::invalid_argument("shape dataset: num_classes in 2..10");
  if (opt.per_class < 1) throw std::invalid_argument("shape dataset: per_class >= 1");
  if (!(opt.contrast > 0.0 && opt.contrast <= 1.0))
    throw std::invalid_argument("shape dataset: contrast in (0, 1]");

  RngStream root(opt.seed, "shapes-" + opt.split);
  Dataset d;
  d.num_classes = opt.num_classes;
  for (int cls = 0; cls < opt.num_classes; ++cls)
    for (int n = 0; n < opt.per_class; ++n) {
      RngStream r = root.fork("c" + std::to_string(cls) + "-n" + std::to_string(n));
      ImageTensor img = render_shape(cls, opt.side, opt.channels, r);
      if (opt.contrast < 1.0)
        for (float& v : img.data) v = float(0.5 + opt.contrast * (double(v) - 0.5));
      d.images.push_back(std::move(img));
      d.labels.push_back(cls);
    }
  return d;
}

}  // namespace fencekit
