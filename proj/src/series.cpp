#include "dvar/series.hpp"

#include <algorithm>
#include <cmath>

namespace dvar::series {

std::vector<double> centered_moving_average(const std::vector<double>& values, std::size_t w) {
    if (w <= 1 || values.empty()) {
        return values;
    }
    const std::size_t n = values.size();
    const std::size_t half = w / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) {
            acc += values[k];
        }
        out[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double mean(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (const double x : values) {
        acc += x;
    }
    return acc / static_cast<double>(values.size());
}

double stddev(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    const double mu = mean(values);
    double acc = 0.0;
    for (const double x : values) {
        acc += (x - mu) * (x - mu);
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

double median(std::vector<double> values) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace dvar::series
