#pragma once
// Compression transforms built on an 8x8 blockwise DCT codec.

#include <array>
#include <cstdint>
#include <vector>

#include "fencekit/image.hpp"
#include "fencekit/rng.hpp"

namespace fencekit {

using QuantTable = std::array<int, 64>;  // row-major 8x8, entries >= 1

// Standard base quantization tables.
const QuantTable& std_luma_table();
const QuantTable& std_chroma_table();

// Base table scaled to quality Q in [1,100]: scale = 5000/Q below 50, else
// 200 - 2Q; entries floor((t*scale + 50)/100) clamped to [1, 255].
QuantTable scale_table(const QuantTable& base, int quality);

// Zig-zag index (0..63) of coefficient (u, v).
int zigzag_index(int u, int v);

// One DCT quantization round trip.  3-channel images go through full-range
// luma-chroma conversion and use `luma` on Y and `chroma` on Cb/Cr; grayscale
// uses `luma` directly.  Blocks are padded by edge replication.
ImageTensor jpeg_roundtrip(const ImageTensor& x, const QuantTable& luma, const QuantTable& chroma);

// Feature distillation: two-band table (q_low inside zig-zag index <
// band_threshold, q_high outside), optionally applied for several passes.
struct FdSpec {
  int band_threshold = 16;
  int q_low = 30;
  int q_high = 80;
  int passes = 1;
  bool operator==(const FdSpec&) const = default;
};
ImageTensor apply_fd(const FdSpec& s, const ImageTensor& x, RngStream& rng);

// Bit-depth reduction: v' = round(v * (2^bits - 1)) / (2^bits - 1).
struct BdrSpec {
  int bits = 3;  // 1..8
  bool operator==(const BdrSpec&) const = default;
};
ImageTensor apply_bdr(const BdrSpec& s, const ImageTensor& x, RngStream& rng);

// Random-quality DCT round trip, Q ~ integer U(q_min, q_max).
struct RjpegSpec {
  int q_min = 20;
  int q_max = 80;
  bool operator==(const RjpegSpec&) const = default;
};
ImageTensor apply_rjpeg(const RjpegSpec& s, const ImageTensor& x, RngStream& rng);

// Predictive block codec: blocks in raster order are predicted from the mean
// of the reconstructed border pixels of the left/top neighbours (0.5 when
// there is none) and the residual is quantized in the DCT domain at a random
// quality Q ~ integer U(q_min, q_max).
struct RwebpSpec {
  int q_min = 20;
  int q_max = 80;
  bool operator==(const RwebpSpec&) const = default;
};
ImageTensor apply_rwebp(const RwebpSpec& s, const ImageTensor& x, RngStream& rng);

// Per-block random quality drawn from a candidate set (blocks in raster
// order, one draw per spatial block shared by all channels).
struct ShieldSpec {
  std::vector<int> qualities = {20, 40, 60, 80};
  bool operator==(const ShieldSpec&) const = default;
};
ImageTensor apply_shield(const ShieldSpec& s, const ImageTensor& x, RngStream& rng);

}  // namespace fencekit
