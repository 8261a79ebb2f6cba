#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fsr/errors.hpp"
#include "fsr/image.hpp"
#include "fsr/interp.hpp"
#include "fsr/rng.hpp"
#include "test_util.hpp"

using namespace fsr;
using fsrtest::TempDir;

namespace {

// zlib.compress(data, 9): dynamic-huffman blocks from a reference encoder.
const std::vector<uint8_t> kRefDynamic = {
    120,218,99,224,16,146,147,215,55,177,118,113,242,15,12,141,78,206,173,172,234,234,159,54,
    127,238,170,53,27,182,237,59,113,229,234,211,87,31,127,253,96,101,231,22,148,84,214,55,112,
    112,245,9,13,78,72,74,203,41,169,235,234,158,189,96,249,134,117,187,247,30,60,126,254,230,
    211,103,223,126,51,113,115,138,73,200,40,105,153,56,56,6,134,197,166,165,20,22,151,215,182,
    246,207,158,179,102,227,142,131,251,207,156,187,116,227,193,171,111,223,217,121,132,101,164,
    212,53,117,141,173,93,3,131,146,210,243,202,75,155,90,58,250,166,45,88,179,118,239,161,147,
    151,46,220,189,255,248,229,199,223,236,28,18,178,42,186,218,22,86,118,46,62,97,73,201,197,
    21,245,29,109,147,167,206,156,191,124,227,222,125,231,46,223,122,252,240,221,135,47,191,152,
    120,36,36,53,245,76,237,108,60,189,253,67,99,211,139,75,90,58,39,204,156,190,100,217,170,
    13,59,14,157,59,127,255,201,235,47,159,254,51,178,114,11,203,106,106,89,217,187,249,251,70,
    197,36,164,229,85,180,180,78,157,181,112,213,138,173,219,119,31,60,121,249,254,131,15,95,
    255,176,50,11,8,137,201,168,232,89,89,123,7,132,39,196,101,231,22,150,215,119,78,157,182,
    108,245,166,221,59,143,157,56,115,233,214,147,15,31,25,217,120,197,68,20,149,213,117,77,237,
    189,125,98,18,51,10,243,107,234,154,58,38,204,90,182,124,251,158,195,103,78,93,191,121,247,
    241,235,175,140,76,66,226,114,234,170,70,38,22,118,110,1,49,177,185,69,149,77,13,189,253,
    147,103,46,92,189,125,199,137,179,87,238,222,126,241,234,221,151,63,108,66,194,202,26,250,
    22,102,206,174,158,254,225,137,185,121,117,205,93,147,39,206,91,176,100,213,166,61,39,78,
    222,188,247,244,221,155,196,164,228,81,68,36,2,0,162,116,55,84};

// zlib Z_FIXED strategy over "hello hello hello world world!".
const std::vector<uint8_t> kRefFixed = {120, 1,   203, 72,  205, 201, 201, 87,
                                        200, 64,  34,  203, 243, 139, 114, 82,
                                        32,  164, 34,  0,   175, 170, 11,  46};

// PIL-encoded PNGs with known pixel content.
const std::vector<uint8_t> kPilRgbPng = {
    137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,13,0,0,0,9,8,2,0,0,0,102,24,49,61,0,0,
    0,59,73,68,65,84,120,218,237,202,49,10,128,48,16,0,193,59,46,139,72,8,18,22,177,244,255,
    191,76,101,97,229,7,132,169,150,205,136,144,148,18,100,147,93,186,12,57,100,138,114,202,
    213,234,206,226,219,255,61,222,125,1,45,169,6,100,70,83,202,66,0,0,0,0,73,69,78,68,174,66,
    96,130};

const std::vector<uint8_t> kPilGrayPng = {
    137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,6,0,0,0,7,8,0,0,0,0,14,251,99,49,0,0,0,
    23,73,68,65,84,120,156,99,248,207,192,240,159,129,129,129,129,225,63,6,194,42,8,0,87,231,
    13,243,45,146,183,174,0,0,0,0,73,69,78,68,174,66,96,130};

// Depth-4 palette PNG (PIL ADAPTIVE quantization of the RGB image above).
const std::vector<uint8_t> kPilPalettePng = {
    137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,13,0,0,0,9,4,3,0,0,0,27,84,187,89,0,0,
    0,48,80,76,84,69,179,235,82,186,200,90,60,235,14,66,199,15,190,167,96,193,133,100,71,162,
    17,65,128,16,216,70,124,151,87,62,205,21,102,145,31,55,60,95,13,61,59,14,84,16,20,21,21,2,
    76,2,166,44,0,0,0,73,73,68,65,84,120,156,5,193,65,13,128,48,12,64,209,95,82,37,88,64,28,
    162,112,64,144,176,38,156,8,55,102,128,116,119,182,150,247,36,179,25,239,173,60,68,117,166,
    72,175,221,144,194,54,31,124,178,226,81,233,234,48,140,148,5,12,80,7,246,118,41,101,156,25,
    252,89,62,35,37,120,208,27,149,0,0,0,0,73,69,78,68,174,66,96,130};

const std::vector<uint8_t> kPilPalettePixels = {
    21,21,2,21,21,2,21,21,2,84,16,20,84,16,20,84,16,20,145,31,55,145,31,55,145,31,55,145,31,55,
    205,21,102,216,70,124,216,70,124,21,21,2,21,21,2,61,59,14,61,59,14,61,59,14,61,59,14,145,
    31,55,151,87,62,151,87,62,151,87,62,216,70,124,216,70,124,216,70,124,21,21,2,61,59,14,61,
    59,14,60,95,13,60,95,13,60,95,13,151,87,62,151,87,62,151,87,62,193,133,100,193,133,100,193,
    133,100,216,70,124,60,95,13,60,95,13,60,95,13,60,95,13,65,128,16,65,128,16,151,87,62,151,
    87,62,193,133,100,193,133,100,193,133,100,193,133,100,193,133,100,65,128,16,65,128,16,65,
    128,16,65,128,16,71,162,17,71,162,17,71,162,17,190,167,96,190,167,96,190,167,96,190,167,96,
    190,167,96,190,167,96,71,162,17,71,162,17,71,162,17,71,162,17,71,162,17,71,162,17,71,162,
    17,186,200,90,186,200,90,186,200,90,186,200,90,186,200,90,186,200,90,66,199,15,66,199,15,
    66,199,15,66,199,15,66,199,15,66,199,15,179,235,82,179,235,82,179,235,82,179,235,82,179,
    235,82,179,235,82,179,235,82,60,235,14,60,235,14,60,235,14,60,235,14,60,235,14,60,235,14,
    179,235,82,179,235,82,145,31,55,205,21,102,205,21,102,205,21,102,216,70,124,60,235,14,60,
    235,14,84,16,20,84,16,20,84,16,20,145,31,55,145,31,55,145,31,55,145,31,55,205,21,102,205,
    21,102,216,70,124,216,70,124};

}  // namespace

TEST_CASE("inflate reproduces reference zlib streams") {
  std::vector<uint8_t> want;
  for (int i = 0; i < 400; ++i) want.push_back(uint8_t((i * 7 + (i * i) % 13) % 256));
  for (int i = 0; i < 20; ++i)
    for (char c : {'a', 'b', 'c', 'a', 'b', 'c', 'a', 'b', 'c', 'a', 'b', 'c', 'a', 'b', 'c'})
      want.push_back(uint8_t(c));
  CHECK(zlib_inflate(kRefDynamic.data(), kRefDynamic.size()) == want);

  const std::string fixed_want = "hello hello hello world world!";
  auto got = zlib_inflate(kRefFixed.data(), kRefFixed.size());
  CHECK(std::string(got.begin(), got.end()) == fixed_want);
}

TEST_CASE("decodes reference-encoder pngs bit-exactly") {
  const ImageU8 rgb = decode_image_bytes(kPilRgbPng, "pil_rgb");
  REQUIRE(rgb.w == 13);
  REQUIRE(rgb.h == 9);
  REQUIRE(rgb.channels == 3);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 13; ++x) {
      const uint8_t* p = rgb.at(y, x);
      CHECK(p[0] == uint8_t((x * 19 + y * 3) % 256));
      CHECK(p[1] == uint8_t((x * 5 + y * 31) % 256));
      CHECK(p[2] == uint8_t((x * x + y) % 256));
    }

  const ImageU8 gray = decode_image_bytes(kPilGrayPng, "pil_gray");
  REQUIRE(gray.w == 6);
  REQUIRE(gray.h == 7);
  REQUIRE(gray.channels == 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 6; ++x) CHECK(gray.at(y, x)[0] == ((x + y) % 3 == 0 ? 255 : 0));

  const ImageU8 pal = decode_image_bytes(kPilPalettePng, "pil_palette");
  REQUIRE(pal.w == 13);
  REQUIRE(pal.h == 9);
  REQUIRE(pal.channels == 3);
  size_t i = 0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 13; ++x)
      for (int c = 0; c < 3; ++c) CHECK(pal.at(y, x)[c] == kPilPalettePixels[i++]);
}

TEST_CASE("png encode/decode round trip") {
  fsr::Rng rng(3);
  for (auto [w, h, ch] : {std::array{1, 1, 1}, std::array{17, 5, 3}, std::array{64, 64, 1},
                          std::array{31, 47, 3}}) {
    const ImageU8 img = fsrtest::random_image(rng, w, h, ch);
    const auto bytes = encode_png(img);
    const ImageU8 back = decode_image_bytes(bytes, "roundtrip");
    REQUIRE(back.w == w);
    REQUIRE(back.h == h);
    REQUIRE(back.channels == ch);
    CHECK(back.px == img.px);
  }
}

TEST_CASE("bmp decode") {
  // Hand-built 3x2 24-bit BMP, bottom-up rows padded to 4 bytes.
  auto le32v = [](std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 24));
  };
  std::vector<uint8_t> bmp{'B', 'M'};
  le32v(bmp, 54 + 24);          // file size
  le32v(bmp, 0);                // reserved
  le32v(bmp, 54);               // data offset
  le32v(bmp, 40);               // header size
  le32v(bmp, 3);                // width
  le32v(bmp, 2);                // height (bottom-up)
  bmp.push_back(1); bmp.push_back(0);   // planes
  bmp.push_back(24); bmp.push_back(0);  // bpp
  le32v(bmp, 0);                // compression
  le32v(bmp, 24);               // image size
  le32v(bmp, 0); le32v(bmp, 0); le32v(bmp, 0); le32v(bmp, 0);
  // bottom row first: pixels BGR
  const uint8_t rows[2][12] = {{255, 0, 0, 0, 255, 0, 0, 0, 255, 0, 0, 0},    // y=1: B,G,R
                               {10, 20, 30, 40, 50, 60, 70, 80, 90, 0, 0, 0}}; // y=0
  bmp.insert(bmp.end(), rows[0], rows[0] + 12);
  bmp.insert(bmp.end(), rows[1], rows[1] + 12);

  const ImageU8 img = decode_image_bytes(bmp, "bmp");
  REQUIRE(img.w == 3);
  REQUIRE(img.h == 2);
  REQUIRE(img.channels == 3);
  CHECK(img.at(0, 0)[0] == 30);  // RGB from BGR
  CHECK(img.at(0, 0)[2] == 10);
  CHECK(img.at(1, 0)[2] == 255);  // blue pixel
  CHECK(img.at(1, 1)[1] == 255);  // green pixel
  CHECK(img.at(1, 2)[0] == 255);  // red pixel
}

TEST_CASE("pnm round trip and decode errors") {
  TempDir dir("image");
  fsr::Rng rng(5);
  const ImageU8 img = fsrtest::random_image(rng, 9, 4, 3);
  write_pnm(dir.file("x.ppm"), img);
  const ImageU8 back = decode_image(dir.file("x.ppm"));
  CHECK(back.px == img.px);

  {
    std::ofstream junk(dir.file("junk.png"), std::ios::binary);
    junk << "this is not an image";
  }
  CHECK_THROWS_AS((void)decode_image(dir.file("junk.png")), DataError);
  CHECK_THROWS_AS((void)decode_image(dir.file("missing.png")), DataError);

  // Truncated PNG: valid signature, cut mid-chunk.
  auto bytes = encode_png(img);
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS((void)decode_image_bytes(bytes, "truncated"), DataError);

  // Corrupt a payload byte: chunk crc must catch it.
  auto bad = encode_png(img);
  bad[50] ^= 0x5a;
  CHECK_THROWS_AS((void)decode_image_bytes(bad, "corrupt"), DataError);
}

TEST_CASE("bilinear resize matches independent pixel oracle") {
  fsr::Rng rng(7);
  const int sh = 8, sw = 8;
  std::vector<float> src(sh * sw);
  for (auto& v : src) v = rng.next_float();

  // Naive oracle written directly from the half-pixel-center definition.
  auto oracle = [&](int dh, int dw, int y, int x) {
    double fy = (y + 0.5) * double(sh) / dh - 0.5;
    double fx = (x + 0.5) * double(sw) / dw - 0.5;
    fy = std::min(std::max(fy, 0.0), double(sh - 1));
    fx = std::min(std::max(fx, 0.0), double(sw - 1));
    const int y0 = int(fy), x0 = int(fx);
    const int y1 = std::min(y0 + 1, sh - 1), x1 = std::min(x0 + 1, sw - 1);
    const double wy = fy - y0, wx = fx - x0;
    return (1 - wy) * ((1 - wx) * src[y0 * sw + x0] + wx * src[y0 * sw + x1]) +
           wy * ((1 - wx) * src[y1 * sw + x0] + wx * src[y1 * sw + x1]);
  };

  for (auto [dh, dw] : {std::array{5, 11}, std::array{16, 16}, std::array{3, 3}}) {
    std::vector<float> dst(size_t(dh) * dw);
    bilinear_resize_plane(src.data(), sh, sw, dst.data(), dh, dw);
    for (int y = 0; y < dh; ++y)
      for (int x = 0; x < dw; ++x)
        CHECK(std::fabs(dst[y * dw + x] - oracle(dh, dw, y, x)) <= 1e-6);
  }
}

TEST_CASE("nearest resize preserves block fractions on exact upscales") {
  std::vector<uint8_t> src(16, 0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 2; ++x) src[y * 4 + x] = 1;  // left half set
  std::vector<uint8_t> dst(64);
  nearest_resize_plane(src.data(), 4, 4, dst.data(), 8, 8);
  int ones = 0;
  for (auto v : dst) ones += v;
  CHECK(ones == 32);
}
