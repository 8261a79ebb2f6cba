// Self-contained image I/O: PNG (8/16-bit gray, palette, RGB(A), with an
// internal DEFLATE decoder), uncompressed BMP, and binary PPM/PGM. Decoding
// dispatches on magic bytes, not file extension.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fsr {

// Interleaved 8-bit pixels, channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  int w = 0, h = 0, channels = 0;
  std::vector<uint8_t> px;

  ImageU8() = default;
  ImageU8(int w_, int h_, int ch) : w(w_), h(h_), channels(ch), px(size_t(w_) * h_ * ch, 0) {}
  uint8_t* at(int y, int x) { return px.data() + (size_t(y) * w + x) * channels; }
  const uint8_t* at(int y, int x) const { return px.data() + (size_t(y) * w + x) * channels; }
};

// Throws DataError with the path on any decode failure.
ImageU8 decode_image(const std::string& path);
ImageU8 decode_image_bytes(const std::vector<uint8_t>& bytes, const std::string& name);

// Writers. PNG output is 8-bit gray or RGB with stored-deflate compression.
void write_png(const std::string& path, const ImageU8& img);
void write_pnm(const std::string& path, const ImageU8& img);

std::vector<uint8_t> encode_png(const ImageU8& img);

// RFC 1950/1951 decompression used by the PNG reader; exposed for tests.
std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t size);

uint32_t crc32(const uint8_t* data, size_t size, uint32_t seed = 0);

}  // namespace fsr
