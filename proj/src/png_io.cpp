#include "vitts/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace vitts {

namespace {

void put_u32be(std::string& s, uint32_t v) {
  s.push_back(char((v >> 24) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char(v & 0xff));
}

uint32_t get_u32be(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
         uint32_t(p[3]);
}

void put_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_u32be(out, uint32_t(payload.size()));
  const size_t crc_start = out.size();
  out.append(type, 4);
  out += payload;
  const uint32_t crc =
      uint32_t(crc32(0, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                     uInt(4 + payload.size())));
  put_u32be(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png_rgba(const std::string& path, const Tensor& pixels, int height,
                    int width) {
  if (pixels.rows() != height * width || pixels.cols() != 4)
    throw std::invalid_argument("write_png_rgba: expected (H*W) x 4 pixels");

  std::string raw;
  raw.reserve(size_t(height) * (size_t(width) * 4 + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter type 0
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 4; ++c) {
        const double v = std::clamp(pixels(y * width + x, c), 0.0, 1.0);
        raw.push_back(char(uint8_t(std::lrint(v * 255.0))));
      }
  }

  uLongf comp_len = compressBound(uLong(raw.size()));
  std::vector<unsigned char> comp(comp_len);
  if (compress2(comp.data(), &comp_len, reinterpret_cast<const Bytef*>(raw.data()),
                uLong(raw.size()), 6) != Z_OK)
    throw std::runtime_error("write_png_rgba: deflate failed");

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, uint32_t(width));
  put_u32be(ihdr, uint32_t(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(6);   // RGBA
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", std::string(reinterpret_cast<char*>(comp.data()), comp_len));
  put_chunk(out, "IEND", "");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_png_rgba: cannot open " + path);
  f.write(out.data(), std::streamsize(out.size()));
}

Tensor read_png_rgba(const std::string& path, int& height, int& width) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_png_rgba: cannot open " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (s.size() < 8 || std::memcmp(s.data() + 1, "PNG", 3) != 0)
    throw std::runtime_error("read_png_rgba: not a PNG: " + path);

  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  size_t pos = 8;
  width = height = 0;
  int bit_depth = 0, color_type = 0;
  std::string idat;
  while (pos + 12 <= s.size()) {
    const uint32_t len = get_u32be(p + pos);
    const std::string type = s.substr(pos + 4, 4);
    const size_t data = pos + 8;
    if (data + len > s.size()) throw std::runtime_error("read_png_rgba: truncated");
    if (type == "IHDR") {
      width = int(get_u32be(p + data));
      height = int(get_u32be(p + data + 4));
      bit_depth = p[data + 8];
      color_type = p[data + 9];
    } else if (type == "IDAT") {
      idat.append(s, data, len);
    } else if (type == "IEND") {
      break;
    }
    pos = data + len + 4;
  }
  if (bit_depth != 8 || color_type != 6)
    throw std::runtime_error("read_png_rgba: only 8-bit RGBA supported");

  const size_t stride = size_t(width) * 4;
  const size_t raw_len = size_t(height) * (stride + 1);
  std::vector<unsigned char> raw(raw_len);
  uLongf out_len = uLongf(raw_len);
  if (uncompress(raw.data(), &out_len, reinterpret_cast<const Bytef*>(idat.data()),
                 uLong(idat.size())) != Z_OK ||
      out_len != raw_len)
    throw std::runtime_error("read_png_rgba: inflate failed");

  // de-filter scanlines
  std::vector<unsigned char> img(size_t(height) * stride);
  for (int y = 0; y < height; ++y) {
    const unsigned char filter = raw[size_t(y) * (stride + 1)];
    const unsigned char* src = raw.data() + size_t(y) * (stride + 1) + 1;
    unsigned char* dst = img.data() + size_t(y) * stride;
    const unsigned char* up = y > 0 ? dst - stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= 4 ? dst[x - 4] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= 4) ? up[x - 4] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw std::runtime_error("read_png_rgba: bad filter");
      }
      dst[x] = (unsigned char)(v & 0xff);
    }
  }

  Tensor out(height * width, 4);
  for (int i = 0; i < height * width; ++i)
    for (int c = 0; c < 4; ++c)
      out(i, c) = double(img[size_t(i) * 4 + size_t(c)]) / 255.0;
  return out;
}

}  // namespace vitts
