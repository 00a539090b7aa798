#pragma once

#include <vector>

#include "hetchoice/common.hpp"

namespace hetchoice {

/// Natural-breaks partition of one-dimensional data.
struct BreaksResult {
    std::vector<double> breakpoints;   // inclusive upper bound per class, last = data max
    std::vector<int> assignment;       // category 1..k per input value, original order
    std::vector<long long> class_counts;
    double sdam = 0.0;                 // squared deviations from the grand mean
    double sdcm = 0.0;                 // squared deviations from class means
    double gvf = 0.0;                  // 1 - SDCM/SDAM (1 when SDAM == 0)
};

/// Exact dynamic program over sorted values minimising the within-class sum of
/// squared deviations; ties resolved toward the partition with the
/// lexicographically smallest breakpoints.
BreaksResult jenks_breaks(const std::vector<double>& values, int k);

/// Smallest category whose inclusive upper bound covers the value; values
/// above the last bound map to the top category.
int classify_value(double value, const std::vector<double>& breakpoints);

}  // namespace hetchoice
