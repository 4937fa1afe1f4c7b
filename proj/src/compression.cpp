#include "fencekit/compression.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace fencekit {

namespace {

// Chroma planes are centered on byte value 128 so that neutral gray has an
// exactly-zero DC coefficient after the level shift.
constexpr double kChromaOffset = 128.0 / 255.0;

// Orthonormal 8x8 DCT-II matrix: row u, sample j.
struct DctBasis {
  double m[8][8];
  DctBasis() {
    for (int u = 0; u < 8; ++u)
      for (int j = 0; j < 8; ++j)
        m[u][j] = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5 * std::cos((2 * j + 1) * u * M_PI / 16.0);
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

// out[u*8+v] = sum_{i,j} in[i*8+j] D[u][i] D[v][j], separably.
void dct8(const double in[64], double out[64]) {
  const auto& d = basis().m;
  double tmp[64];
  for (int i = 0; i < 8; ++i)
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int j = 0; j < 8; ++j) s += in[i * 8 + j] * d[v][j];
      tmp[i * 8 + v] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int i = 0; i < 8; ++i) s += d[u][i] * tmp[i * 8 + v];
      out[u * 8 + v] = s;
    }
}

void idct8(const double in[64], double out[64]) {
  const auto& d = basis().m;
  double tmp[64];
  for (int u = 0; u < 8; ++u)
    for (int j = 0; j < 8; ++j) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += in[u * 8 + v] * d[v][j];
      tmp[u * 8 + j] = s;
    }
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += d[u][i] * tmp[u * 8 + j];
      out[i * 8 + j] = s;
    }
}

void require_table(const QuantTable& t) {
  for (int v : t)
    if (v < 1) throw std::invalid_argument("quantization table entries must be >= 1");
}

// Split into per-component planes in the level-shifted byte domain
// (value*255 - 128).  3-channel images use full-range luma-chroma planes;
// anything else is treated as independent luma planes.
std::vector<std::vector<double>> to_planes(const ImageTensor& x) {
  size_t n = size_t(x.height) * x.width;
  std::vector<std::vector<double>> planes;
  if (x.channels == 3) {
    planes.assign(3, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i) {
      double r = x.data[3 * i], g = x.data[3 * i + 1], b = x.data[3 * i + 2];
      double y = 0.299 * r + 0.587 * g + 0.114 * b;
      double cb = kChromaOffset - 0.168736 * r - 0.331264 * g + 0.5 * b;
      double cr = kChromaOffset + 0.5 * r - 0.418688 * g - 0.081312 * b;
      planes[0][i] = y * 255.0 - 128.0;
      planes[1][i] = cb * 255.0 - 128.0;
      planes[2][i] = cr * 255.0 - 128.0;
    }
  } else {
    planes.assign(x.channels, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
      for (int c = 0; c < x.channels; ++c) planes[c][i] = x.data[i * x.channels + c] * 255.0 - 128.0;
  }
  return planes;
}

ImageTensor from_planes(const std::vector<std::vector<double>>& planes, int h, int w,
                        int channels) {
  ImageTensor out(h, w, channels);
  size_t n = size_t(h) * w;
  if (channels == 3) {
    for (size_t i = 0; i < n; ++i) {
      double y = (planes[0][i] + 128.0) / 255.0;
      double cb = (planes[1][i] + 128.0) / 255.0 - kChromaOffset;
      double cr = (planes[2][i] + 128.0) / 255.0 - kChromaOffset;
      out.data[3 * i] = float(std::clamp(y + 1.402 * cr, 0.0, 1.0));
      out.data[3 * i + 1] = float(std::clamp(y - 0.344136 * cb - 0.714136 * cr, 0.0, 1.0));
      out.data[3 * i + 2] = float(std::clamp(y + 1.772 * cb, 0.0, 1.0));
    }
  } else {
    for (size_t i = 0; i < n; ++i)
      for (int c = 0; c < channels; ++c)
        out.data[i * channels + c] = float(std::clamp((planes[c][i] + 128.0) / 255.0, 0.0, 1.0));
  }
  return out;
}

std::vector<double> pad_plane(const std::vector<double>& p, int h, int w, int hp, int wp) {
  std::vector<double> out(size_t(hp) * wp);
  for (int i = 0; i < hp; ++i) {
    int si = std::min(i, h - 1);
    for (int j = 0; j < wp; ++j) out[size_t(i) * wp + j] = p[size_t(si) * w + std::min(j, w - 1)];
  }
  return out;
}

void unpad_plane(const std::vector<double>& padded, int wp, std::vector<double>& p, int h, int w) {
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) p[size_t(i) * w + j] = padded[size_t(i) * wp + j];
}

void quantize_block(std::vector<double>& plane, int wp, int by, int bx, const QuantTable& t) {
  double blk[64], coef[64];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) blk[i * 8 + j] = plane[size_t(by * 8 + i) * wp + bx * 8 + j];
  dct8(blk, coef);
  for (int k = 0; k < 64; ++k) coef[k] = double(std::lround(coef[k] / t[k])) * t[k];
  idct8(coef, blk);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) plane[size_t(by * 8 + i) * wp + bx * 8 + j] = blk[i * 8 + j];
}

// Shared round-trip core; the provider picks the table per (plane, block).
// Blocks are independent, so the block loop parallelizes without affecting
// the result.
ImageTensor roundtrip_with(
    const ImageTensor& x,
    const std::function<const QuantTable&(int plane, int by, int bx)>& table_for) {
  auto planes = to_planes(x);
  int hp = (x.height + 7) / 8 * 8, wp = (x.width + 7) / 8 * 8;
  int nbx = wp / 8, nby = hp / 8;
  for (int c = 0; c < int(planes.size()); ++c) {
    auto padded = pad_plane(planes[c], x.height, x.width, hp, wp);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nby * nbx; ++b)
      quantize_block(padded, wp, b / nbx, b % nbx, table_for(c, b / nbx, b % nbx));
    unpad_plane(padded, wp, planes[c], x.height, x.width);
  }
  return from_planes(planes, x.height, x.width, x.channels);
}

}  // namespace

const QuantTable& std_luma_table() {
  static const QuantTable t = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,
                               55, 14, 13, 16, 24,  40,  57,  69,  56, 14, 17, 22, 29,  51,  87,
                               80, 62, 18, 22, 37,  56,  68,  109, 103, 77, 24, 35, 55,  64,  81,
                               104, 113, 92, 49, 64, 78,  87,  103, 121, 120, 101, 72, 92, 95, 98,
                               112, 100, 103, 99};
  return t;
}

const QuantTable& std_chroma_table() {
  static const QuantTable t = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                               24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                               99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                               99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  return t;
}

QuantTable scale_table(const QuantTable& base, int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("quality must be in [1, 100]");
  int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  QuantTable out;
  for (int k = 0; k < 64; ++k) out[k] = std::clamp((base[k] * scale + 50) / 100, 1, 255);
  return out;
}

int zigzag_index(int u, int v) {
  static const std::array<int, 64> table = [] {
    std::array<int, 64> t{};
    int order = 0;
    for (int s = 0; s <= 14; ++s) {
      if (s % 2 == 0)
        for (int i = std::min(s, 7); i >= std::max(0, s - 7); --i) t[i * 8 + (s - i)] = order++;
      else
        for (int i = std::max(0, s - 7); i <= std::min(s, 7); ++i) t[i * 8 + (s - i)] = order++;
    }
    return t;
  }();
  if (u < 0 || u > 7 || v < 0 || v > 7) throw std::out_of_range("zigzag_index: bad coefficient");
  return table[u * 8 + v];
}

ImageTensor jpeg_roundtrip(const ImageTensor& x, const QuantTable& luma,
                           const QuantTable& chroma) {
  require_table(luma);
  require_table(chroma);
  bool color = x.channels == 3;
  return roundtrip_with(x, [&](int plane, int, int) -> const QuantTable& {
    return (plane == 0 || !color) ? luma : chroma;
  });
}

ImageTensor apply_fd(const FdSpec& s, const ImageTensor& x, RngStream&) {
  require_transform_size(x);
  if (s.band_threshold < 0 || s.band_threshold > 64)
    throw std::invalid_argument("FD: band threshold must be in [0, 64]");
  if (s.q_low < 1 || s.q_low > 255 || s.q_high < 1 || s.q_high > 255)
    throw std::invalid_argument("FD: quantization steps must be in [1, 255]");
  if (s.passes < 1) throw std::invalid_argument("FD: passes must be >= 1");

  QuantTable t;
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v)
      t[u * 8 + v] = zigzag_index(u, v) < s.band_threshold ? s.q_low : s.q_high;
  ImageTensor out = x;
  for (int p = 0; p < s.passes; ++p) out = jpeg_roundtrip(out, t, t);
  return out;
}

ImageTensor apply_bdr(const BdrSpec& s, const ImageTensor& x, RngStream&) {
  require_transform_size(x);
  if (s.bits < 1 || s.bits > 8) throw std::invalid_argument("BdR: bits must be in [1, 8]");
  double k = double((1 << s.bits) - 1);
  ImageTensor out = x;
  for (float& v : out.data) v = float(double(std::lround(double(v) * k)) / k);
  return out;
}

ImageTensor apply_rjpeg(const RjpegSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.q_min < 1 || s.q_min > s.q_max || s.q_max > 100)
    throw std::invalid_argument("R-JPEG: need 1 <= q_min <= q_max <= 100");
  int q = int(rng.uniform_int(s.q_min, s.q_max));
  return jpeg_roundtrip(x, scale_table(std_luma_table(), q), scale_table(std_chroma_table(), q));
}

ImageTensor apply_shield(const ShieldSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.qualities.empty()) throw std::invalid_argument("SHIELD: empty quality set");
  for (int q : s.qualities)
    if (q < 1 || q > 100) throw std::invalid_argument("SHIELD: quality must be in [1, 100]");

  std::vector<QuantTable> luma, chroma;
  for (int q : s.qualities) {
    luma.push_back(scale_table(std_luma_table(), q));
    chroma.push_back(scale_table(std_chroma_table(), q));
  }
  // one quality choice per spatial block, drawn in raster order up front
  int nbx = (x.width + 7) / 8, nby = (x.height + 7) / 8;
  std::vector<int> choice(size_t(nby) * nbx);
  for (auto& c : choice) c = int(rng.uniform_int(0, int64_t(s.qualities.size()) - 1));

  bool color = x.channels == 3;
  return roundtrip_with(x, [&](int plane, int by, int bx) -> const QuantTable& {
    int c = choice[size_t(by) * nbx + bx];
    return (plane == 0 || !color) ? luma[c] : chroma[c];
  });
}

ImageTensor apply_rwebp(const RwebpSpec& s, const ImageTensor& x, RngStream& rng) {
  require_transform_size(x);
  if (s.q_min < 1 || s.q_min > s.q_max || s.q_max > 100)
    throw std::invalid_argument("R-WebP: need 1 <= q_min <= q_max <= 100");
  int q = int(rng.uniform_int(s.q_min, s.q_max));
  QuantTable luma = scale_table(std_luma_table(), q);
  QuantTable chroma = scale_table(std_chroma_table(), q);

  auto planes = to_planes(x);
  int hp = (x.height + 7) / 8 * 8, wp = (x.width + 7) / 8 * 8;
  int nbx = wp / 8, nby = hp / 8;
  bool color = x.channels == 3;
  for (int c = 0; c < int(planes.size()); ++c) {
    const QuantTable& t = (c == 0 || !color) ? luma : chroma;
    auto rec = pad_plane(planes[c], x.height, x.width, hp, wp);
    // Sequential raster scan: each block is predicted from reconstructed
    // neighbours, so the order is part of the definition.
    for (int by = 0; by < nby; ++by)
      for (int bx = 0; bx < nbx; ++bx) {
        double sum = 0;
        int cnt = 0;
        if (bx > 0)
          for (int i = 0; i < 8; ++i) {
            sum += rec[size_t(by * 8 + i) * wp + bx * 8 - 1];
            ++cnt;
          }
        if (by > 0)
          for (int j = 0; j < 8; ++j) {
            sum += rec[size_t(by * 8 - 1) * wp + bx * 8 + j];
            ++cnt;
          }
        double pred = cnt ? sum / cnt : 0.5 * 255.0 - 128.0;

        double blk[64], coef[64];
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j)
            blk[i * 8 + j] = rec[size_t(by * 8 + i) * wp + bx * 8 + j] - pred;
        dct8(blk, coef);
        for (int k = 0; k < 64; ++k) coef[k] = double(std::lround(coef[k] / t[k])) * t[k];
        idct8(coef, blk);
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j)
            rec[size_t(by * 8 + i) * wp + bx * 8 + j] =
                std::clamp(pred + blk[i * 8 + j], -128.0, 127.0);
      }
    unpad_plane(rec, wp, planes[c], x.height, x.width);
  }
  return from_planes(planes, x.height, x.width, x.channels);
}

}  // namespace fencekit
