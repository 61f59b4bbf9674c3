#pragma once

#include <cstddef>
#include <vector>

namespace plcrnn::audio {

inline constexpr int kSampleRate = 16000;

struct AudioSignal {
    std::vector<double> samples;
    int sample_rate = kSampleRate;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Mean square over the whole signal (0 for an empty one).
double power(const AudioSignal& s);
double energy(const AudioSignal& s);

/// Throws InputError unless every sample is finite and the rate is 16 kHz.
void require_pipeline_ready(const AudioSignal& s, const char* what);

}  // namespace plcrnn::audio
