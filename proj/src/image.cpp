#include "fencekit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace fencekit {

void clip_unit(ImageTensor& x) {
  for (auto& v : x.data) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

ImageTensor load_image(const std::string& path) {
  FilePtr fp(fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("load_image: cannot open " + path);

  unsigned char sig[8];
  if (fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw std::runtime_error("load_image: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_image: PNG decode error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);
  if (depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_image: unsupported bit depth (want 8): " + path);
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  int h = int(png_get_image_height(png, info));
  int w = int(png_get_image_width(png, info));
  int c = int(png_get_channels(png, info));
  if (c != 1 && c != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("load_image: unsupported channel count: " + path);
  }

  std::vector<unsigned char> row(size_t(w) * c);
  ImageTensor out(h, w, c);
  for (int i = 0; i < h; ++i) {
    png_read_row(png, row.data(), nullptr);
    for (size_t k = 0; k < row.size(); ++k)
      out.data[size_t(i) * w * c + k] = float(row[k]) / 255.0f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void save_image(const ImageTensor& x, const std::string& path) {
  if (x.channels != 1 && x.channels != 3)
    throw std::invalid_argument("save_image: channels must be 1 or 3");
  FilePtr fp(fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("save_image: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("save_image: PNG encode error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, x.width, x.height, 8,
               x.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(size_t(x.width) * x.channels);
  for (int i = 0; i < x.height; ++i) {
    for (size_t k = 0; k < row.size(); ++k) {
      float v = std::clamp(x.data[size_t(i) * row.size() + k], 0.0f, 1.0f);
      row[k] = (unsigned char)(std::lround(v * 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

ImageTensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tensor: cannot open " + path);
  char magic[4];
  uint32_t h = 0, w = 0, c = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&c), 4);
  if (!in || std::memcmp(magic, "FKT1", 4) != 0)
    throw std::runtime_error("load_tensor: bad header in " + path);
  if (h == 0 || w == 0 || c == 0 || h > 1u << 20 || w > 1u << 20 || c > 16)
    throw std::runtime_error("load_tensor: implausible shape in " + path);
  ImageTensor out{int(h), int(w), int(c)};
  in.read(reinterpret_cast<char*>(out.data.data()), std::streamsize(out.size() * 4));
  if (!in) throw std::runtime_error("load_tensor: truncated file " + path);
  return out;
}

void save_tensor(const ImageTensor& x, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_tensor: cannot open " + path);
  uint32_t h = uint32_t(x.height), w = uint32_t(x.width), c = uint32_t(x.channels);
  out.write("FKT1", 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&c), 4);
  out.write(reinterpret_cast<const char*>(x.data.data()), std::streamsize(x.size() * 4));
  if (!out) throw std::runtime_error("save_tensor: write failed " + path);
}

}  // namespace fencekit
