#pragma once

#include <cstddef>
#include <vector>

namespace dvar::series {

/// Centered moving average with window `w`; near the edges the window is
/// clipped to the available range. w = 1 returns the input unchanged.
std::vector<double> centered_moving_average(const std::vector<double>& values, std::size_t w);

double mean(const std::vector<double>& values);

/// Population standard deviation (divide by count).
double stddev(const std::vector<double>& values);

double median(std::vector<double> values);

}  // namespace dvar::series
