#include "dvar/rng.hpp"

#include <cmath>
#include <numbers>

namespace dvar {

double RngStream::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    // 1 - u1 lies in (0, 1], so the log is finite.
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t draw;
    do {
        draw = gen_();
    } while (draw > limit);
    return draw % n;
}

std::vector<double> RngStream::normal_vector(std::size_t n) {
    std::vector<double> out(n);
    for (double& x : out) {
        x = normal();
    }
    return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream_name) {
    // FNV-1a over the stream name, then splitmix64 mixing with the master seed.
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : stream_name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace dvar
