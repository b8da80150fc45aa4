#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radgan/audio_features.hpp"

namespace radgan {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major RGB

  RgbImage(int w, int h, uint8_t fill = 255);
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b);
};

struct FigureLayout {
  int panel_width = 320;
  int wave_height = 120;
  int spec_height = 160;
  int gutter = 6;
};

// Two rows per signal column: waveform on top, log-magnitude spectrogram
// below, columns in the given order.
RgbImage comparison_figure(const std::vector<WaveformSegment>& columns, const FigureLayout& layout = {});

void write_png(const std::string& path, const RgbImage& image);
RgbImage read_png(const std::string& path);

}  // namespace radgan
