#include "plcrnn/audio/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "plcrnn/error.hpp"

namespace plcrnn::audio {

namespace {

std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = path.string() + ": ";
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw IoError(where + "not a RIFF/WAVE file");
    }

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = le32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw IoError(where + "truncated chunk");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw IoError(where + "fmt chunk too short");
            format = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            rate = le32(bytes.data() + body + 4);
            bits = le16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw IoError(where + "data chunk before fmt chunk");
            if (format != 1) throw IoError(where + "unsupported format tag " + std::to_string(format) + " (need PCM = 1)");
            if (channels != 1) {
                throw IoError(where + "unsupported channel count " + std::to_string(channels) + " (need mono)");
            }
            if (rate != static_cast<std::uint32_t>(kSampleRate)) {
                throw IoError(where + "unsupported sample rate " + std::to_string(rate) + " Hz (need 16000 Hz)");
            }
            if (bits != 16) throw IoError(where + "unsupported bit depth " + std::to_string(bits) + " (need 16)");
            AudioSignal sig;
            sig.sample_rate = static_cast<int>(rate);
            sig.samples.resize(size / 2);
            for (std::size_t i = 0; i < sig.samples.size(); ++i) {
                const auto raw = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
                sig.samples[i] = static_cast<double>(raw) / 32768.0;
            }
            return sig;
        }
        pos = body + size + (size & 1);
    }
    throw IoError(where + "no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
    if (signal.sample_rate != kSampleRate) {
        throw IoError("write_wav: sample rate " + std::to_string(signal.sample_rate) + " Hz, only 16000 Hz is written");
    }
    const auto n = static_cast<std::uint32_t>(signal.samples.size());
    std::vector<unsigned char> out;
    out.reserve(44 + 2 * n);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put32(out, 36 + 2 * n);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put32(out, 16);
    put16(out, 1);
    put16(out, 1);
    put32(out, kSampleRate);
    put32(out, kSampleRate * 2);
    put16(out, 2);
    put16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put32(out, 2 * n);
    for (double v : signal.samples) {
        const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace plcrnn::audio
