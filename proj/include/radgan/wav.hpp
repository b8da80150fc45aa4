#pragma once

#include <string>

#include "radgan/audio_features.hpp"

namespace radgan {

// Mono 16-bit PCM at 8 kHz only; anything else is rejected.
WaveformSegment read_wav(const std::string& path);
// Quantizes to 16-bit PCM with the same 1/32768 scale read_wav uses, clipping at full scale.
void write_wav(const std::string& path, const WaveformSegment& w);

}  // namespace radgan
