#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dvar {

/// Deterministic random stream. All draws are derived from mt19937_64 with
/// fixed bit-level constructions (no std::*_distribution, whose algorithms are
/// implementation-defined), so sequences are reproducible across platforms
/// and standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform();

    /// Standard normal via Box-Muller; the second value of each pair is cached.
    double normal();

    /// Uniform integer in [0, n). Rejection sampling, exactly uniform. n >= 1.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Vector of i.i.d. standard normals.
    std::vector<double> normal_vector(std::size_t n);

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stable 64-bit seed for a named child stream of a master seed. Distinct
/// stream names yield decorrelated generators.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_name);

}  // namespace dvar
