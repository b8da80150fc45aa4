#include "radgan/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace radgan {

namespace {

uint32_t le32(const unsigned char* p) { return p[0] | (p[1] << 8) | (p[2] << 16) | (uint32_t{p[3]} << 24); }
uint16_t le16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::ostream& o, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  o.write(reinterpret_cast<const char*>(b), 4);
}

void put16(std::ostream& o, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  o.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

WaveformSegment read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error(path + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint32_t size = le32(&bytes[pos + 4]);
    const unsigned char* body = &bytes[pos + 8];
    if (pos + 8 + size > bytes.size()) throw std::runtime_error(path + ": truncated chunk");
    if (std::memcmp(&bytes[pos], "fmt ", 4) == 0 && size >= 16) {
      format = le16(body);
      channels = le16(body + 2);
      rate = le32(body + 4);
      bits = le16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error(path + ": data chunk before fmt chunk");
      if (format != 1 || bits != 16 || channels != 1) {
        throw std::runtime_error(path + ": only mono 16-bit PCM is supported");
      }
      if (rate != static_cast<uint32_t>(kSampleRate)) {
        throw std::runtime_error(path + ": sample rate " + std::to_string(rate) + " Hz, expected 8000 Hz");
      }
      WaveformSegment w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(size / 2);
      for (size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = static_cast<int16_t>(le16(body + 2 * i)) / 32768.0;
      }
      return w;
    }
    pos += 8 + size + (size & 1);
  }
  throw std::runtime_error(path + ": no data chunk");
}

void write_wav(const std::string& path, const WaveformSegment& w) {
  if (w.sample_rate != kSampleRate) throw std::invalid_argument("write_wav: only 8000 Hz output is supported");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<uint32_t>(w.sample_rate));
  put32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (double v : w.samples) {
    const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace radgan
