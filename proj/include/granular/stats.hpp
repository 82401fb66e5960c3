#pragma once

#include <span>
#include <vector>

namespace granular {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R and NumPy default).
double quantile_type7(std::span<const double> values, double prob);

double mean(std::span<const double> values);
/// Unbiased (n - 1) sample variance; zero for fewer than two values.
double variance(std::span<const double> values);

}  // namespace granular
