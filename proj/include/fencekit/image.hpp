#pragma once
// Image container and file I/O.  Pixels are floats in [0,1], stored row-major
// as (row, col, channel).

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fencekit {

struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, float fill = 0.0f) : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("ImageTensor: non-positive shape");
    data.assign(size_t(h) * w * c, fill);
  }

  static ImageTensor zeros(int h, int w, int c) { return ImageTensor(h, w, c, 0.0f); }
  static ImageTensor constant(int h, int w, int c, float v) { return ImageTensor(h, w, c, v); }

  float& at(int y, int x, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Clamp every value into [0,1] in place.
void clip_unit(ImageTensor& x);

// Minimum side length required by the 8x8 block transforms; enforced at every
// transform entry point (metrics and geometry accept smaller images).
inline constexpr int kMinTransformSide = 8;

inline void require_transform_size(const ImageTensor& x) {
  if (x.height < kMinTransformSide || x.width < kMinTransformSide)
    throw std::invalid_argument("transform requires height and width >= 8");
}

// 8-bit grayscale or RGB PNG.  Values are mapped v = byte/255.  Alpha is
// stripped; palette images are expanded to RGB; any bit depth other than 8
// is rejected.
ImageTensor load_image(const std::string& path);
void save_image(const ImageTensor& x, const std::string& path);

// Raw tensor file: 16-byte header (magic "FKT1", uint32 H, W, C,
// little-endian) followed by float32 data.  Used for golden fixtures.
ImageTensor load_tensor(const std::string& path);
void save_tensor(const ImageTensor& x, const std::string& path);

}  // namespace fencekit
