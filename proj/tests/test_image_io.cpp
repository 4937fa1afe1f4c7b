#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fencekit/image.hpp"
#include "fencekit/metrics.hpp"
#include "fencekit/rng.hpp"

using namespace fencekit;
namespace fs = std::filesystem;

static ImageTensor random_image(int h, int w, int c, uint64_t seed) {
  RngStream r(seed);
  ImageTensor x(h, w, c);
  for (auto& v : x.data) v = float(r.uniform());
  return x;
}

static std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

TEST_CASE("constructor rejects non-positive shapes") {
  CHECK_THROWS(ImageTensor(0, 4, 1));
  CHECK_THROWS(ImageTensor(4, -1, 1));
  CHECK_THROWS(ImageTensor(4, 4, 0));
}

TEST_CASE("png round trip stays within quantization error") {
  auto x = random_image(16, 12, 3, 1);
  auto p = tmp_path("fk_io_rt.png");
  save_image(x, p);
  auto y = load_image(p);
  REQUIRE(y.same_shape(x));
  CHECK(linf_distance(x, y) <= 0.5 / 255.0 + 1e-9);
  fs::remove(p);
}

TEST_CASE("grayscale png round trip") {
  auto x = random_image(9, 9, 1, 2);
  auto p = tmp_path("fk_io_gray.png");
  save_image(x, p);
  auto y = load_image(p);
  REQUIRE(y.channels == 1);
  CHECK(linf_distance(x, y) <= 0.5 / 255.0 + 1e-9);
  fs::remove(p);
}

TEST_CASE("saved bytes load back exact") {
  // Save quantizes; loading the file again must reproduce the same floats.
  auto x = random_image(8, 8, 3, 3);
  auto p = tmp_path("fk_io_exact.png");
  save_image(x, p);
  auto y = load_image(p);
  save_image(y, p);
  auto z = load_image(p);
  CHECK(y.data == z.data);
  fs::remove(p);
}

TEST_CASE("known byte values map to v/255") {
  // 2x2 grayscale with bytes {0, 128, 255, 64}, written with a reference
  // encoder (libpng) and read back as k/255.
  ImageTensor x(2, 2, 1);
  x.at(0, 0, 0) = 0.0f;
  x.at(0, 1, 0) = 128.0f / 255.0f;
  x.at(1, 0, 0) = 1.0f;
  x.at(1, 1, 0) = 64.0f / 255.0f;
  auto p = tmp_path("fk_io_bytes.png");
  save_image(x, p);
  auto y = load_image(p);
  CHECK(y.at(0, 0, 0) == 0.0f);
  CHECK(y.at(0, 1, 0) == 128.0f / 255.0f);
  CHECK(y.at(1, 0, 0) == 1.0f);
  CHECK(y.at(1, 1, 0) == 64.0f / 255.0f);
  fs::remove(p);
}

TEST_CASE("loading a missing or corrupt file throws") {
  CHECK_THROWS(load_image(tmp_path("fk_does_not_exist.png")));
  auto p = tmp_path("fk_io_bad.png");
  std::ofstream(p) << "this is not a png";
  CHECK_THROWS(load_image(p));
  fs::remove(p);
}

TEST_CASE("16-bit png is rejected as unsupported depth") {
  auto p = tmp_path("fk_io_16bit.png");
  {  // write a genuine 16-bit grayscale PNG with libpng
    FILE* fp = fopen(p.c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp pw = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop pi = png_create_info_struct(pw);
    png_init_io(pw, fp);
    png_set_IHDR(pw, pi, 2, 2, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(pw, pi);
    unsigned char row[4] = {0x12, 0x34, 0xab, 0xcd};
    for (int i = 0; i < 2; ++i) png_write_row(pw, row);
    png_write_end(pw, pi);
    png_destroy_write_struct(&pw, &pi);
    fclose(fp);
  }
  CHECK_THROWS(load_image(p));
  fs::remove(p);
}

TEST_CASE("tensor file round trip is bit-exact") {
  auto x = random_image(7, 5, 3, 4);
  auto p = tmp_path("fk_io_tensor.fkt");
  save_tensor(x, p);
  auto y = load_tensor(p);
  REQUIRE(y.same_shape(x));
  CHECK(y.data == x.data);
  fs::remove(p);
}

TEST_CASE("tensor file header is 16 bytes with magic FKT1") {
  auto x = ImageTensor::constant(3, 2, 1, 0.5f);
  auto p = tmp_path("fk_io_hdr.fkt");
  save_tensor(x, p);
  std::ifstream in(p, std::ios::binary);
  char hdr[16];
  in.read(hdr, 16);
  CHECK(std::string(hdr, 4) == "FKT1");
  CHECK(fs::file_size(p) == 16 + 3 * 2 * 1 * 4);
  fs::remove(p);
}

TEST_CASE("tensor loader rejects a bad magic") {
  auto p = tmp_path("fk_io_badmagic.fkt");
  std::ofstream(p, std::ios::binary) << "XXXX0123456789ab";
  CHECK_THROWS(load_tensor(p));
  fs::remove(p);
}

TEST_CASE("clip_unit clamps into range") {
  ImageTensor x(2, 2, 1);
  x.data = {-0.5f, 0.25f, 1.5f, 1.0f};
  clip_unit(x);
  CHECK(x.data == std::vector<float>{0.0f, 0.25f, 1.0f, 1.0f});
}
