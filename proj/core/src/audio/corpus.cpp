#include "plcrnn/audio/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "plcrnn/audio/wav.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::audio {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPeak = 0.9;

std::size_t seconds_to_samples(double s) { return static_cast<std::size_t>(std::llround(s * kSampleRate)); }

void normalize_peak(std::vector<double>& x, double peak) {
    double m = 0;
    for (double v : x) m = std::max(m, std::abs(v));
    if (m > 0) {
        const double k = peak / m;
        for (double& v : x) v *= k;
    }
}

// Smooth 0..1 gate with 10 ms raised-cosine ramps around each silent gap.
double gap_gate(double t, const std::vector<std::pair<double, double>>& gaps) {
    constexpr double ramp = 0.01;
    double g = 1.0;
    for (const auto& [a, b] : gaps) {
        if (t >= a && t <= b) return 0.0;
        if (t > a - ramp && t < a) g = std::min(g, 0.5 + 0.5 * std::cos(std::numbers::pi * (t - (a - ramp)) / ramp));
        if (t > b && t < b + ramp) g = std::min(g, 0.5 - 0.5 * std::cos(std::numbers::pi * (t - b) / ramp));
    }
    return g;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string utt_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "utt%05zu", i);
    return buf;
}

}  // namespace

std::vector<double> default_snr_grid() {
    std::vector<double> g;
    for (int s = -5; s <= 10; ++s) g.push_back(s);
    return g;
}

AudioSignal make_noise_bank(const std::string& kind, std::uint64_t seed, double bank_duration_s) {
    Rng rng = Rng(seed).derive("noise-bank").derive(kind);
    const std::size_t n = seconds_to_samples(bank_duration_s);
    AudioSignal bank;
    bank.samples.resize(n);
    auto& x = bank.samples;
    if (kind == "white") {
        for (auto& v : x) v = rng.normal();
    } else if (kind == "pink") {
        // Paul Kellet's refined 1/f filter on white noise.
        double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
        for (auto& v : x) {
            const double w = rng.normal();
            b0 = 0.99886 * b0 + w * 0.0555179;
            b1 = 0.99332 * b1 + w * 0.0750759;
            b2 = 0.96900 * b2 + w * 0.1538520;
            b3 = 0.86650 * b3 + w * 0.3104856;
            b4 = 0.55000 * b4 + w * 0.5329522;
            b5 = -0.7616 * b5 - w * 0.0168980;
            v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
            b6 = w * 0.115926;
        }
    } else if (kind == "am_tone") {
        // One-second segments, each a tone in 400-3000 Hz under 2-8 Hz AM,
        // plus a low white floor so no segment is silent.
        const std::size_t seg = kSampleRate;
        double phase = 0;
        for (std::size_t start = 0; start < n; start += seg) {
            const double f = rng.uniform(400.0, 3000.0);
            const double fm = rng.uniform(2.0, 8.0);
            const double pm = rng.uniform(0.0, kTwoPi);
            for (std::size_t i = start; i < std::min(n, start + seg); ++i) {
                const double t = static_cast<double>(i) / kSampleRate;
                phase += kTwoPi * f / kSampleRate;
                x[i] = (0.6 + 0.4 * std::sin(kTwoPi * fm * t + pm)) * std::sin(phase) + 0.02 * rng.normal();
            }
        }
    } else {
        throw InputError("unknown noise kind '" + kind + "'");
    }
    normalize_peak(x, kPeak);
    return bank;
}

AudioSignal synth_clean(Rng& rng, std::size_t length) {
    AudioSignal out;
    out.samples.assign(length, 0.0);
    const double dur = static_cast<double>(length) / kSampleRate;
    const double f0 = rng.uniform(100.0, 300.0);
    const double glide = rng.uniform(-0.15, 0.15);
    const auto harmonics = static_cast<std::size_t>(rng.uniform_int(2, 4));
    std::vector<double> amp(harmonics), ph(harmonics);
    for (std::size_t h = 0; h < harmonics; ++h) {
        amp[h] = rng.uniform(0.3, 1.0) / static_cast<double>(h + 1);
        ph[h] = rng.uniform(0.0, kTwoPi);
    }
    const double syl_rate = rng.uniform(2.0, 6.0);
    const double syl_phase = rng.uniform(0.0, kTwoPi);

    // Leading/trailing silence plus one or two interior pauses.
    std::vector<std::pair<double, double>> gaps;
    gaps.emplace_back(-1.0, rng.uniform(0.0, 0.1));
    gaps.emplace_back(dur - rng.uniform(0.0, 0.1), dur + 1.0);
    const auto pauses = rng.uniform_int(1, 2);
    for (std::int64_t p = 0; p < pauses; ++p) {
        const double len = rng.uniform(0.05, 0.2);
        const double at = rng.uniform(0.2, 0.8) * dur;
        gaps.emplace_back(at, at + len);
    }

    auto render = [&](const std::vector<std::pair<double, double>>& g) {
        double f0_phase = 0;
        bool voiced = false;
        for (std::size_t i = 0; i < length; ++i) {
            const double t = static_cast<double>(i) / kSampleRate;
            const double f = f0 * (1.0 + glide * t / std::max(dur, 1e-9));
            f0_phase += kTwoPi * f / kSampleRate;
            double v = 0;
            for (std::size_t h = 0; h < harmonics; ++h)
                v += amp[h] * std::sin(static_cast<double>(h + 1) * f0_phase + ph[h]);
            const double env = std::pow(0.5 + 0.5 * std::sin(kTwoPi * syl_rate * t + syl_phase), 2.0);
            out.samples[i] = v * (0.1 + 0.9 * env) * gap_gate(t, g);
            voiced = voiced || out.samples[i] != 0.0;
        }
        return voiced;
    };
    if (!render(gaps)) {
        // Very short utterances can be gated away entirely; keep the middle
        // half voiced instead.
        render({{-1.0, 0.25 * dur}, {0.75 * dur, dur + 1.0}});
    }
    normalize_peak(out.samples, kPeak);
    return out;
}

std::vector<Utterance> synth_corpus(std::size_t n, std::uint64_t seed, const SynthOptions& options) {
    if (n == 0) throw InputError("synth_corpus: need at least one utterance");
    if (!(options.min_duration_s > 0.0) || options.max_duration_s < options.min_duration_s) {
        throw InputError("synth_corpus: invalid duration range");
    }
    const std::vector<double> grid = options.snr_grid.empty() ? default_snr_grid() : options.snr_grid;
    const auto& kinds = noise_kinds();
    std::vector<AudioSignal> banks;
    for (const auto& k : kinds) banks.push_back(make_noise_bank(k, seed, options.bank_duration_s));

    const Rng root = Rng(seed).derive("corpus");
    std::vector<Utterance> corpus;
    corpus.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = root.derive(static_cast<std::uint64_t>(i));
        const std::size_t len =
            seconds_to_samples(rng.uniform(options.min_duration_s, options.max_duration_s));
        const auto kind = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(kinds.size()) - 1));
        const double snr = grid[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(grid.size()) - 1))];
        const AudioSignal& bank = banks[kind];
        // Cut points are drawn so the segment fits; wrap only if the bank is
        // shorter than the utterance.
        const std::size_t max_cut = bank.size() > len ? bank.size() - len : bank.size() - 1;
        const auto cut = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_cut)));
        Rng clean_rng = rng.derive("clean");
        const AudioSignal clean = synth_clean(clean_rng, len);

        Utterance u;
        u.spec.clean_id = utt_id(i);
        u.spec.noise_id = kinds[kind];
        u.spec.snr_db = snr;
        u.spec.cut_point = cut;
        u.spec.seed = rng.seed();
        const AudioSignal noise = cut_noise(bank, cut, len, &u.spec.wrapped);
        u.pair = mix_at_snr(clean, noise, snr);

        // Keep the mixture inside the 16-bit range by scaling clean and
        // noise together, which leaves the SNR unchanged.
        double peak = 0;
        for (double v : u.pair.noisy.samples) peak = std::max(peak, std::abs(v));
        if (peak > kPeak) {
            const double k = kPeak / peak;
            for (std::size_t j = 0; j < len; ++j) {
                u.pair.clean.samples[j] *= k;
                u.pair.noise.samples[j] *= k;
                u.pair.noisy.samples[j] = u.pair.clean.samples[j] + u.pair.noise.samples[j];
            }
        }
        corpus.push_back(std::move(u));
    }
    return corpus;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<Utterance>& corpus) {
    namespace fs = std::filesystem;
    std::error_code ec;
    for (const char* sub : {"clean", "noise", "noisy"}) {
        fs::create_directories(dir / sub, ec);
        if (ec) throw IoError("cannot create directory " + (dir / sub).string() + ": " + ec.message());
    }
    std::ofstream manifest(dir / "manifest.tsv");
    if (!manifest) throw IoError("cannot write " + (dir / "manifest.tsv").string());
    manifest << "# id\tclean\tnoise\tnoisy\tnoise_id\tsnr_db\tcut_point\tseed\twrapped\n";
    for (const auto& u : corpus) {
        const std::string id = u.spec.clean_id;
        const std::string clean = "clean/" + id + ".wav";
        const std::string noise = "noise/" + id + ".wav";
        const std::string noisy = "noisy/" + id + ".wav";
        write_wav(dir / clean, u.pair.clean);
        write_wav(dir / noise, u.pair.noise);
        write_wav(dir / noisy, u.pair.noisy);
        manifest << id << '\t' << clean << '\t' << noise << '\t' << noisy << '\t' << u.spec.noise_id << '\t'
                 << fmt_double(u.spec.snr_db) << '\t' << u.spec.cut_point << '\t' << u.spec.seed << '\t'
                 << (u.spec.wrapped ? 1 : 0) << '\n';
    }
    if (!manifest) throw IoError("failed writing " + (dir / "manifest.tsv").string());
}

std::vector<Utterance> load_corpus(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.tsv";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus manifest " + path.string());
    std::vector<Utterance> corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) f.push_back(cell);
        if (f.size() != 9) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields, got " +
                          std::to_string(f.size()));
        }
        Utterance u;
        try {
            u.spec.clean_id = f[0];
            u.spec.noise_id = f[4];
            u.spec.snr_db = std::stod(f[5]);
            u.spec.cut_point = std::stoull(f[6]);
            u.spec.seed = std::stoull(f[7]);
            u.spec.wrapped = f[8] == "1";
        } catch (const std::exception&) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed numeric field");
        }
        u.pair.clean = read_wav(dir / f[1]);
        u.pair.noise = read_wav(dir / f[2]);
        if (u.pair.clean.size() != u.pair.noise.size()) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": clean and noise lengths differ");
        }
        u.pair.snr_db = u.spec.snr_db;
        u.pair.noisy = u.pair.clean;
        for (std::size_t i = 0; i < u.pair.noisy.size(); ++i) u.pair.noisy.samples[i] += u.pair.noise.samples[i];
        corpus.push_back(std::move(u));
    }
    if (corpus.empty()) throw IoError("corpus manifest " + path.string() + " lists no utterances");
    return corpus;
}

}  // namespace plcrnn::audio
