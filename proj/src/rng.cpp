#include "cxrkit/rng.hpp"

#include <cmath>
#include <numbers>

#include "cxrkit/common.hpp"

namespace cxrkit {

double Rng::normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = fnv1a64(&a, sizeof(a));
    return fnv1a64(&b, sizeof(b), h);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = fnv1a64(&base, sizeof(base));
    return fnv1a64(tag, h);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    std::uint64_t h = derive_seed(base, tag);
    return fnv1a64(&index, sizeof(index), h);
}

} // namespace cxrkit
