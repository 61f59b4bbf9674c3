#pragma once

#include <filesystem>

#include "plcrnn/audio/signal.hpp"

namespace plcrnn::audio {

/// Reads RIFF/WAVE, PCM 16-bit little-endian, mono, 16 kHz. Samples are
/// scaled to [-1, 1) by 1/32768. Any other layout is rejected with an
/// IoError that names what was found (format tag, channel count, rate, or
/// bit depth).
AudioSignal read_wav(const std::filesystem::path& path);

/// Writes the same layout. Samples are rounded to the nearest 1/32768 step
/// and clamped to the int16 range.
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

}  // namespace plcrnn::audio
