#include "vitts/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vitts {

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
uint32_t get_u32(const char* p) {
  uint32_t v = 0;
  std::memcpy(&v, p, 4);
  return v;
}
uint16_t get_u16(const char* p) {
  uint16_t v = 0;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate) {
  const uint32_t data_bytes = uint32_t(samples.size() * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  put_u32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);  // PCM
  put_u16(s, 1);  // mono
  put_u32(s, uint32_t(sample_rate));
  put_u32(s, uint32_t(sample_rate * 2));
  put_u16(s, 2);
  put_u16(s, 16);
  s += "data";
  put_u32(s, data_bytes);
  for (double x : samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    const int16_t q = int16_t(std::lrint(c * 32767.0));
    put_u16(s, uint16_t(q));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path);
  f.write(s.data(), std::streamsize(s.size()));
}

std::vector<double> read_wav(const std::string& path, int expect_rate) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_wav: cannot open " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (s.size() < 44 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
    throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  int channels = 0, rate = 0, bits = 0;
  std::vector<double> out;
  while (pos + 8 <= s.size()) {
    const std::string id = s.substr(pos, 4);
    const uint32_t len = get_u32(s.data() + pos + 4);
    pos += 8;
    if (pos + len > s.size()) throw std::runtime_error("read_wav: truncated chunk");
    if (id == "fmt ") {
      if (get_u16(s.data() + pos) != 1)
        throw std::runtime_error("read_wav: only PCM supported");
      channels = get_u16(s.data() + pos + 2);
      rate = int(get_u32(s.data() + pos + 4));
      bits = get_u16(s.data() + pos + 14);
    } else if (id == "data") {
      if (channels != 1 || bits != 16)
        throw std::runtime_error("read_wav: expected 16-bit mono PCM");
      if (rate != expect_rate)
        throw std::runtime_error("read_wav: sample rate " + std::to_string(rate) +
                                 " != expected " + std::to_string(expect_rate));
      out.resize(len / 2);
      for (size_t i = 0; i < out.size(); ++i)
        out[i] = double(int16_t(get_u16(s.data() + pos + 2 * i))) / 32767.0;
      return out;
    }
    pos += len + (len & 1);
  }
  throw std::runtime_error("read_wav: no data chunk in " + path);
}

}  // namespace vitts
