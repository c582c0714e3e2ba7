#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace afpnet {

inline constexpr const char* kVersion = "0.1.0";

/// Reserved token ids, shared by the lexer and the model.
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Violated data contract: malformed manifest, bad label, unreadable file,
/// conflicting duplicate labels. Maps to CLI exit code 2.
struct DataError : Error {
    using Error::Error;
};

/// Invalid configuration value or shape mismatch.
struct ConfigError : Error {
    using Error::Error;
};

/// Uniform double in [0, 1) built from the top 53 bits of the generator
/// output. Streams stay reproducible across standard library implementations,
/// unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased draw from [0, bound) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw ConfigError("uniform_below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= threshold) return x % bound;
    }
}

/// Fisher-Yates permutation of {0, ..., n-1}, fully determined by the seed.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw DataError("cannot read file: " + path.string());
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("cannot write file: " + path.string());
}

}  // namespace afpnet
