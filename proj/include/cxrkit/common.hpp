#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cxrkit {

// Error categories the CLI maps onto exit codes (2/3/4).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t state = kFnvOffset);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = kFnvOffset);
// String literals must hash as text, not fall to the void* overload with the
// state argument reinterpreted as a byte count.
inline std::uint64_t fnv1a64(const char* text, std::uint64_t state = kFnvOffset) {
    return fnv1a64(std::string_view(text), state);
}

std::string to_hex(std::uint64_t value);

// "2026-08-16T12:34:56Z"
std::string iso8601_utc_now();

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

} // namespace cxrkit
