#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace plcrnn {

/// Seedable random source with named sub-streams.
///
/// Every stochastic component (corpus synthesis, parameter init, batch
/// shuffling) takes an Rng derived from one root seed by name, so a run is a
/// pure function of that seed regardless of the order in which components
/// draw numbers. The uniform/normal transforms are implemented here rather
/// than via <random> distributions, whose output is library-specific.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    /// Independent stream keyed by (this stream's seed, name).
    Rng derive(std::string_view name) const;
    Rng derive(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace plcrnn
