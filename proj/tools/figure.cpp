#include "radgan/figure.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace radgan {

namespace {

// Dark blue -> teal -> yellow ramp.
std::array<uint8_t, 3> colormap(double t) {
  static constexpr double stops[][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(static_cast<int>(t), 3);
  const double f = t - i;
  std::array<uint8_t, 3> c{};
  for (int k = 0; k < 3; ++k) c[static_cast<size_t>(k)] = static_cast<uint8_t>(stops[i][k] + f * (stops[i + 1][k] - stops[i][k]));
  return c;
}

void draw_waveform(RgbImage& img, const WaveformSegment& w, int x0, int y0, int width, int height) {
  const int mid = y0 + height / 2;
  for (int x = 0; x < width; ++x) img.set(x0 + x, mid, 200, 200, 200);
  if (w.samples.empty()) return;
  double peak = 1e-9;
  for (double v : w.samples) peak = std::max(peak, std::fabs(v));
  const int64_t n = w.size();
  for (int x = 0; x < width; ++x) {
    const int64_t a = n * x / width, b = std::max(a + 1, n * (x + 1) / width);
    double lo = 0.0, hi = 0.0;
    for (int64_t i = a; i < b && i < n; ++i) {
      lo = std::min(lo, w.samples[static_cast<size_t>(i)]);
      hi = std::max(hi, w.samples[static_cast<size_t>(i)]);
    }
    const int top = mid - static_cast<int>(std::lround(hi / peak * (height / 2 - 2)));
    const int bottom = mid - static_cast<int>(std::lround(lo / peak * (height / 2 - 2)));
    for (int y = top; y <= bottom; ++y) img.set(x0 + x, y, 31, 90, 160);
  }
}

void draw_spectrogram(RgbImage& img, const WaveformSegment& w, int x0, int y0, int width, int height) {
  if (w.size() < 2) return;
  const SpectrogramConfig cfg{512, 64, 512, WindowKind::hann};
  const ComplexSpectrogram s = stft(w, cfg);
  std::vector<double> db(s.data.size());
  double top = -1e9;
  for (size_t i = 0; i < db.size(); ++i) {
    db[i] = 20.0 * std::log10(std::abs(s.data[i]) + 1e-9);
    top = std::max(top, db[i]);
  }
  constexpr double kRangeDb = 80.0;
  for (int x = 0; x < width; ++x) {
    const int64_t t = std::min<int64_t>(s.frames - 1, s.frames * x / width);
    for (int y = 0; y < height; ++y) {
      const int64_t k = std::min<int64_t>(s.bins - 1, s.bins * (height - 1 - y) / height);
      const auto c = colormap((db[static_cast<size_t>(k * s.frames + t)] - top + kRangeDb) / kRangeDb);
      img.set(x0 + x, y0 + y, c[0], c[1], c[2]);
    }
  }
}

}  // namespace

RgbImage::RgbImage(int w, int h, uint8_t fill)
    : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h) * 3, fill) {}

void RgbImage::set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  uint8_t* p = &pixels[(static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) * 3];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

RgbImage comparison_figure(const std::vector<WaveformSegment>& columns, const FigureLayout& l) {
  if (columns.empty()) throw std::invalid_argument("figure needs at least one signal");
  const int n = static_cast<int>(columns.size());
  RgbImage img(n * l.panel_width + (n + 1) * l.gutter, l.wave_height + l.spec_height + 3 * l.gutter);
  for (int c = 0; c < n; ++c) {
    const int x0 = l.gutter + c * (l.panel_width + l.gutter);
    draw_waveform(img, columns[static_cast<size_t>(c)], x0, l.gutter, l.panel_width, l.wave_height);
    draw_spectrogram(img, columns[static_cast<size_t>(c)], x0, 2 * l.gutter + l.wave_height, l.panel_width,
                     l.spec_height);
  }
  return img;
}

void write_png(const std::string& path, const RgbImage& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed encoding " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<size_t>(y) * static_cast<size_t>(image.width) * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) throw std::runtime_error("cannot read " + path);
  img.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("failed decoding " + path);
  }
  return out;
}

}  // namespace radgan
