#include "plcrnn/audio/signal.hpp"

#include <cmath>
#include <string>

#include "plcrnn/error.hpp"

namespace plcrnn::audio {

double energy(const AudioSignal& s) {
    double e = 0;
    for (double v : s.samples) e += v * v;
    return e;
}

double power(const AudioSignal& s) {
    return s.samples.empty() ? 0.0 : energy(s) / static_cast<double>(s.samples.size());
}

void require_pipeline_ready(const AudioSignal& s, const char* what) {
    if (s.sample_rate != kSampleRate) {
        throw InputError(std::string(what) + ": sample rate " + std::to_string(s.sample_rate) +
                         " Hz, expected 16000 Hz");
    }
    for (double v : s.samples) {
        if (!std::isfinite(v)) throw InputError(std::string(what) + ": non-finite sample");
    }
}

}  // namespace plcrnn::audio
