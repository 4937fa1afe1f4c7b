#pragma once
// Built-in synthetic 10-class shape dataset.  Each sample renders one of ten
// bold geometric glyphs with a random pose (shift, scale, rotation), random
// fore/background colours, mild blur and pixel noise, so the classes carry
// intra-class geometric and photometric variation.

#include "fencekit/model.hpp"
#include "fencekit/rng.hpp"

namespace fencekit {

struct ShapeSetOptions {
  int side = 32;
  int channels = 3;   // 1 or 3
  int num_classes = 10;  // 2..10, prefix of the class list
  int per_class = 200;
  uint64_t seed = 1;
  std::string split = "train";  // folded into the rng label
  double contrast = 1.0;  // (0, 1]: values are squeezed towards 0.5 by this factor
};

// Class order: disk, ring, h-bar, v-bar, d-bar, plus, triangle, half-disk,
// h-dumbbell, v-dumbbell.
ImageTensor render_shape(int class_id, int side, int channels, RngStream& rng);

Dataset make_shape_dataset(const ShapeSetOptions& opt);

}  // namespace fencekit
