#pragma once

#include <span>
#include <vector>

namespace bisimkit {

// Sample Pearson correlation. Throws std::invalid_argument on length mismatch,
// fewer than two points, or a constant input.
double pearson(std::span<const double> x, std::span<const double> y);

// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
double median(std::vector<double> x);

}  // namespace bisimkit
