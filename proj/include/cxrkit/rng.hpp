#pragma once

#include <cstdint>
#include <string_view>

namespace cxrkit {

// SplitMix64 generator with hand-rolled distributions, so every sampled
// value is fully specified by this code and reproducible across
// platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; two raw draws per sample.
    double normal();

private:
    std::uint64_t state_;
};

// Order-insensitive combination is not wanted here: mixing is positional.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index);

} // namespace cxrkit
