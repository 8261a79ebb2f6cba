#include "fsr/image.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "fsr/errors.hpp"

namespace fsr {

namespace {

[[noreturn]] void fail(const std::string& name, const std::string& why) {
  throw DataError("decode error: " + name + ": " + why);
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("decode error: " + path + ": cannot open file");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}
uint32_t le32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}
uint16_t le16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }

// ---------------------------------------------------------------------------
// DEFLATE (RFC 1951) + zlib wrapper (RFC 1950)
// ---------------------------------------------------------------------------

struct BitReader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;
  uint32_t bitbuf = 0;
  int bitcnt = 0;

  uint32_t bits(int n) {
    while (bitcnt < n) {
      if (pos >= size) throw DataError("inflate: unexpected end of stream");
      bitbuf |= uint32_t(data[pos++]) << bitcnt;
      bitcnt += 8;
    }
    const uint32_t out = bitbuf & ((1u << n) - 1);
    bitbuf >>= n;
    bitcnt -= n;
    return out;
  }

  void align_byte() {
    bitbuf = 0;
    bitcnt = 0;
  }
};

// Canonical Huffman decoder (counts-per-length walk).
struct Huffman {
  std::array<uint16_t, 16> count{};   // codes per bit length
  std::vector<uint16_t> symbol;

  void build(const uint8_t* lengths, int n) {
    count.fill(0);
    for (int i = 0; i < n; ++i) count[lengths[i]]++;
    count[0] = 0;
    symbol.assign(n, 0);
    std::array<uint16_t, 16> offs{};
    for (int len = 1; len < 16; ++len) offs[len] = uint16_t(offs[len - 1] + count[len - 1]);
    for (int i = 0; i < n; ++i)
      if (lengths[i] != 0) symbol[offs[lengths[i]]++] = uint16_t(i);
  }

  int decode(BitReader& br) const {
    int code = 0, first = 0, index = 0;
    for (int len = 1; len < 16; ++len) {
      code |= int(br.bits(1));
      const int cnt = count[len];
      if (code - first < cnt) return symbol[index + (code - first)];
      index += cnt;
      first = (first + cnt) << 1;
      code <<= 1;
    }
    throw DataError("inflate: invalid huffman code");
  }
};

constexpr uint16_t kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,
                                   15, 17, 19, 23, 27, 31, 35, 43, 51,  59,
                                   67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr uint8_t kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                   2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr uint16_t kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,    13,
                                    17,   25,   33,   49,   65,   97,    129,  193,
                                    257,  385,  513,  769,  1025, 1537,  2049, 3073,
                                    4097, 6145, 8193, 12289, 16385, 24577};
constexpr uint8_t kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2,  2,  3,  3,  4,  4,  5,  5, 6,
                                    6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& litlen, const Huffman& dist,
                   std::vector<uint8_t>& out) {
  for (;;) {
    const int sym = litlen.decode(br);
    if (sym < 256) {
      out.push_back(uint8_t(sym));
    } else if (sym == 256) {
      return;
    } else {
      if (sym > 285) throw DataError("inflate: invalid length symbol");
      const int li = sym - 257;
      const uint32_t len = kLenBase[li] + br.bits(kLenExtra[li]);
      const int dsym = dist.decode(br);
      if (dsym > 29) throw DataError("inflate: invalid distance symbol");
      const uint32_t d = kDistBase[dsym] + br.bits(kDistExtra[dsym]);
      if (d > out.size()) throw DataError("inflate: distance beyond output");
      size_t from = out.size() - d;
      for (uint32_t i = 0; i < len; ++i) out.push_back(out[from + i]);
    }
  }
}

std::vector<uint8_t> inflate_raw(BitReader& br) {
  std::vector<uint8_t> out;
  for (;;) {
    const uint32_t final = br.bits(1);
    const uint32_t type = br.bits(2);
    if (type == 0) {
      br.align_byte();
      if (br.pos + 4 > br.size) throw DataError("inflate: truncated stored block");
      const uint16_t len = le16(br.data + br.pos);
      const uint16_t nlen = le16(br.data + br.pos + 2);
      br.pos += 4;
      if (uint16_t(~len) != nlen) throw DataError("inflate: stored length mismatch");
      if (br.pos + len > br.size) throw DataError("inflate: truncated stored data");
      out.insert(out.end(), br.data + br.pos, br.data + br.pos + len);
      br.pos += len;
    } else if (type == 1) {
      static Huffman fixed_lit, fixed_dist;
      static bool built = false;
      if (!built) {
        uint8_t ll[288];
        for (int i = 0; i < 144; ++i) ll[i] = 8;
        for (int i = 144; i < 256; ++i) ll[i] = 9;
        for (int i = 256; i < 280; ++i) ll[i] = 7;
        for (int i = 280; i < 288; ++i) ll[i] = 8;
        fixed_lit.build(ll, 288);
        uint8_t dl[30];
        for (auto& d : dl) d = 5;
        fixed_dist.build(dl, 30);
        built = true;
      }
      inflate_block(br, fixed_lit, fixed_dist, out);
    } else if (type == 2) {
      const int hlit = int(br.bits(5)) + 257;
      const int hdist = int(br.bits(5)) + 1;
      const int hclen = int(br.bits(4)) + 4;
      static constexpr uint8_t kOrder[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                             11, 4,  12, 3, 13, 2, 14, 1, 15};
      uint8_t cl_lengths[19] = {};
      for (int i = 0; i < hclen; ++i) cl_lengths[kOrder[i]] = uint8_t(br.bits(3));
      Huffman cl;
      cl.build(cl_lengths, 19);

      std::vector<uint8_t> lengths(size_t(hlit) + hdist, 0);
      for (int i = 0; i < hlit + hdist;) {
        const int sym = cl.decode(br);
        if (sym < 16) {
          lengths[i++] = uint8_t(sym);
        } else if (sym == 16) {
          if (i == 0) throw DataError("inflate: repeat with no previous length");
          const int rep = 3 + int(br.bits(2));
          for (int r = 0; r < rep && i < hlit + hdist; ++r, ++i) lengths[i] = lengths[i - 1];
        } else if (sym == 17) {
          i += 3 + int(br.bits(3));
        } else {
          i += 11 + int(br.bits(7));
        }
        if (i > hlit + hdist) throw DataError("inflate: code length overflow");
      }
      Huffman litlen, dist;
      litlen.build(lengths.data(), hlit);
      dist.build(lengths.data() + hlit, hdist);
      inflate_block(br, litlen, dist, out);
    } else {
      throw DataError("inflate: invalid block type");
    }
    if (final) return out;
  }
}

uint32_t adler32(const uint8_t* data, size_t size) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < size; ++i) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

}  // namespace

std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t size) {
  if (size < 6) throw DataError("inflate: stream too short");
  const uint8_t cmf = data[0], flg = data[1];
  if ((cmf & 0x0f) != 8) throw DataError("inflate: unsupported compression method");
  if (((uint32_t(cmf) << 8) | flg) % 31 != 0) throw DataError("inflate: bad zlib header");
  if (flg & 0x20) throw DataError("inflate: preset dictionary unsupported");
  BitReader br{data + 2, size - 2};
  auto out = inflate_raw(br);
  // Trailing Adler-32 sits after the last byte consumed by the bit reader.
  if (br.pos + 4 <= br.size) {
    const uint32_t want = be32(br.data + br.pos);
    if (adler32(out.data(), out.size()) != want)
      throw DataError("inflate: adler32 mismatch");
  }
  return out;
}

uint32_t crc32(const uint8_t* data, size_t size, uint32_t seed) {
  static uint32_t table[256];
  static bool built = false;
  if (!built) {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int j = 0; j < 8; ++j) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    built = true;
  }
  uint32_t c = seed ^ 0xffffffffu;
  for (size_t i = 0; i < size; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

namespace {

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

ImageU8 decode_png(const std::vector<uint8_t>& bytes, const std::string& name) {
  static constexpr uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), kSig, 8) != 0)
    fail(name, "not a png");

  size_t pos = 8;
  uint32_t w = 0, h = 0;
  int depth = 0, color = 0;
  std::vector<uint8_t> idat;
  std::vector<std::array<uint8_t, 3>> palette;
  bool saw_ihdr = false, saw_iend = false;

  while (pos + 8 <= bytes.size() && !saw_iend) {
    const uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) fail(name, "truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* payload = &bytes[pos + 8];
    const uint32_t want_crc = be32(&bytes[pos + 8 + len]);
    if (crc32(&bytes[pos + 4], len + 4) != want_crc) fail(name, "chunk crc mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) fail(name, "bad IHDR");
      w = be32(payload);
      h = be32(payload + 4);
      depth = payload[8];
      color = payload[9];
      if (payload[10] != 0 || payload[11] != 0) fail(name, "unsupported compression/filter");
      if (payload[12] != 0) fail(name, "interlaced png unsupported");
      if (color != 0 && color != 2 && color != 3 && color != 4 && color != 6)
        fail(name, "unsupported color type");
      const bool sub_byte_ok = color == 0 || color == 3;
      if (depth != 8 && depth != 16 && !(sub_byte_ok && (depth == 1 || depth == 2 || depth == 4)))
        fail(name, "unsupported bit depth");
      if (w == 0 || h == 0 || w > 1u << 15 || h > 1u << 15) fail(name, "bad dimensions");
      saw_ihdr = true;
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      if (len % 3 != 0) fail(name, "bad palette");
      for (uint32_t i = 0; i < len; i += 3)
        palette.push_back({payload[i], payload[i + 1], payload[i + 2]});
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || idat.empty()) fail(name, "missing IHDR or IDAT");

  const int src_channels = color == 0 ? 1 : color == 2 ? 3 : color == 3 ? 1 : color == 4 ? 2 : 4;
  const int bpp = std::max(1, src_channels * depth / 8);  // filter step in bytes
  const size_t stride = (size_t(w) * src_channels * depth + 7) / 8;

  std::vector<uint8_t> raw;
  try {
    raw = zlib_inflate(idat.data(), idat.size());
  } catch (const DataError& e) {
    fail(name, e.what());
  }
  if (raw.size() != (stride + 1) * h) fail(name, "decompressed size mismatch");

  // Unfilter in place per scanline.
  std::vector<uint8_t> recon(stride * h);
  for (uint32_t y = 0; y < h; ++y) {
    const uint8_t filter = raw[(stride + 1) * y];
    const uint8_t* src = &raw[(stride + 1) * y + 1];
    uint8_t* cur = &recon[stride * y];
    const uint8_t* prior = y > 0 ? &recon[stride * (y - 1)] : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int left = i >= size_t(bpp) ? cur[i - bpp] : 0;
      const int up = prior ? prior[i] : 0;
      const int ul = (prior && i >= size_t(bpp)) ? prior[i - bpp] : 0;
      int x = src[i];
      switch (filter) {
        case 0: break;
        case 1: x += left; break;
        case 2: x += up; break;
        case 3: x += (left + up) / 2; break;
        case 4: x += paeth(left, up, ul); break;
        default: fail(name, "bad filter type");
      }
      cur[i] = uint8_t(x);
    }
  }

  // Convert to 1- or 3-channel 8-bit. 16-bit samples keep the high byte;
  // sub-byte gray scales to full range; alpha is dropped; palette indices
  // expand through PLTE.
  const int out_channels = (color == 2 || color == 3 || color == 6) ? 3 : 1;
  ImageU8 img(int(w), int(h), out_channels);
  const int sample_step = std::max(1, depth / 8);
  std::vector<uint8_t> expanded(size_t{w}, uint8_t{0});  // sub-byte rows, one sample per pixel
  for (uint32_t y = 0; y < h; ++y) {
    const uint8_t* row = &recon[stride * y];
    if (depth < 8) {
      const int mask = (1 << depth) - 1;
      for (uint32_t x = 0; x < w; ++x) {
        const size_t bitpos = size_t(x) * depth;
        const int shift = 8 - depth - int(bitpos & 7);
        expanded[x] = uint8_t((row[bitpos >> 3] >> shift) & mask);
      }
    }
    for (uint32_t x = 0; x < w; ++x) {
      uint8_t* out = img.at(int(y), int(x));
      if (color == 3) {
        const uint8_t idx = depth < 8 ? expanded[x] : row[size_t(x) * bpp];
        if (idx >= palette.size()) fail(name, "palette index out of range");
        const auto& rgb = palette[idx];
        out[0] = rgb[0];
        out[1] = rgb[1];
        out[2] = rgb[2];
      } else if (depth < 8) {  // gray, sub-byte
        const int maxv = (1 << depth) - 1;
        out[0] = uint8_t(int(expanded[x]) * 255 / maxv);
      } else {
        const uint8_t* p = row + size_t(x) * bpp;
        if (out_channels == 3) {
          out[0] = p[0];
          out[1] = p[sample_step];
          out[2] = p[2 * sample_step];
        } else {
          out[0] = p[0];
        }
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// BMP (uncompressed 8/24/32-bit)
// ---------------------------------------------------------------------------

ImageU8 decode_bmp(const std::vector<uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 54) fail(name, "truncated bmp header");
  const uint32_t data_offset = le32(&bytes[10]);
  const uint32_t header_size = le32(&bytes[14]);
  if (header_size < 40) fail(name, "unsupported bmp header");
  const int32_t w = int32_t(le32(&bytes[18]));
  int32_t h = int32_t(le32(&bytes[22]));
  const uint16_t bits = le16(&bytes[28]);
  const uint32_t compression = le32(&bytes[30]);
  if (compression != 0) fail(name, "compressed bmp unsupported");
  if (bits != 8 && bits != 24 && bits != 32) fail(name, "unsupported bmp depth");
  const bool top_down = h < 0;
  if (top_down) h = -h;
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) fail(name, "bad dimensions");

  std::vector<std::array<uint8_t, 3>> palette;
  if (bits == 8) {
    uint32_t colors = le32(&bytes[46]);
    if (colors == 0) colors = 256;
    const size_t pal_off = 14 + header_size;
    if (pal_off + colors * 4 > bytes.size()) fail(name, "truncated palette");
    for (uint32_t i = 0; i < colors; ++i) {
      const uint8_t* e = &bytes[pal_off + i * 4];
      palette.push_back({e[2], e[1], e[0]});  // stored BGR
    }
  }

  const size_t row_stride = (size_t(w) * bits / 8 + 3) & ~size_t(3);
  if (data_offset + row_stride * size_t(h) > bytes.size()) fail(name, "truncated pixel data");

  bool gray_palette = bits == 8;
  for (const auto& e : palette)
    if (e[0] != e[1] || e[1] != e[2]) gray_palette = false;

  ImageU8 img(w, h, gray_palette ? 1 : 3);
  for (int y = 0; y < h; ++y) {
    const int src_y = top_down ? y : h - 1 - y;
    const uint8_t* row = &bytes[data_offset + row_stride * size_t(src_y)];
    for (int x = 0; x < w; ++x) {
      uint8_t* out = img.at(y, x);
      if (bits == 8) {
        const uint8_t idx = row[x];
        if (idx >= palette.size()) fail(name, "palette index out of range");
        if (gray_palette) {
          out[0] = palette[idx][0];
        } else {
          out[0] = palette[idx][0];
          out[1] = palette[idx][1];
          out[2] = palette[idx][2];
        }
      } else {
        const uint8_t* p = row + size_t(x) * bits / 8;
        out[0] = p[2];
        out[1] = p[1];
        out[2] = p[0];
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Binary PPM/PGM
// ---------------------------------------------------------------------------

ImageU8 decode_pnm(const std::vector<uint8_t>& bytes, const std::string& name) {
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    std::string tok;
    while (pos < bytes.size()) {
      const char c = char(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(uint8_t(c))) {
        if (!tok.empty()) return tok;
        ++pos;
      } else {
        tok.push_back(c);
        ++pos;
      }
    }
    return tok;
  };

  const std::string magic = next_token();
  const bool color = magic == "P6";
  if (!color && magic != "P5") fail(name, "unsupported pnm variant");
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) fail(name, "bad pnm header");
  ++pos;  // single whitespace after maxval
  const int channels = color ? 3 : 1;
  const size_t need = size_t(w) * h * channels;
  if (pos + need > bytes.size()) fail(name, "truncated pnm data");
  ImageU8 img(w, h, channels);
  std::memcpy(img.px.data(), &bytes[pos], need);
  return img;
}

}  // namespace

ImageU8 decode_image_bytes(const std::vector<uint8_t>& bytes, const std::string& name) {
  if (bytes.size() >= 8 && bytes[0] == 137 && bytes[1] == 'P' && bytes[2] == 'N')
    return decode_png(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return decode_bmp(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
    return decode_pnm(bytes, name);
  fail(name, "unrecognized image format");
}

ImageU8 decode_image(const std::string& path) {
  return decode_image_bytes(read_file(path), path);
}

namespace {

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& payload) {
  put_be32(out, uint32_t(payload.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  put_be32(out, crc32(out.data() + crc_start, out.size() - crc_start));
}

// Stored (uncompressed) DEFLATE inside a zlib wrapper.
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> out{0x78, 0x01};
  size_t pos = 0;
  do {
    const size_t n = std::min<size_t>(raw.size() - pos, 65535);
    const bool last = pos + n == raw.size();
    out.push_back(last ? 1 : 0);
    out.push_back(uint8_t(n & 0xff));
    out.push_back(uint8_t(n >> 8));
    out.push_back(uint8_t(~n & 0xff));
    out.push_back(uint8_t((~n >> 8) & 0xff));
    out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  } while (pos < raw.size());
  put_be32(out, adler32(raw.data(), raw.size()));
  return out;
}

}  // namespace

std::vector<uint8_t> encode_png(const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ConfigError("png encoder supports 1 or 3 channels");
  std::vector<uint8_t> out{137, 'P', 'N', 'G', 13, 10, 26, 10};

  std::vector<uint8_t> ihdr;
  put_be32(ihdr, uint32_t(img.w));
  put_be32(ihdr, uint32_t(img.h));
  ihdr.push_back(8);
  ihdr.push_back(img.channels == 3 ? 2 : 0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve((size_t(img.w) * img.channels + 1) * img.h);
  for (int y = 0; y < img.h; ++y) {
    raw.push_back(0);  // filter: none
    const uint8_t* row = img.at(y, 0);
    raw.insert(raw.end(), row, row + size_t(img.w) * img.channels);
  }
  put_chunk(out, "IDAT", zlib_store(raw));
  put_chunk(out, "IEND", {});
  return out;
}

void write_png(const std::string& path, const ImageU8& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

void write_pnm(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ConfigError("pnm writer supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.px.data()), std::streamsize(img.px.size()));
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace fsr
