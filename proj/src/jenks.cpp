#include "hetchoice/jenks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace hetchoice {

namespace {

// Sum of squared deviations of sorted[i..j] from its mean, via prefix sums.
struct SegmentCost {
    std::vector<double> s1, s2;  // prefix sums of x and x^2

    explicit SegmentCost(const std::vector<double>& sorted) {
        s1.assign(sorted.size() + 1, 0.0);
        s2.assign(sorted.size() + 1, 0.0);
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            s1[i + 1] = s1[i] + sorted[i];
            s2[i + 1] = s2[i] + sorted[i] * sorted[i];
        }
    }
    double operator()(std::size_t i, std::size_t j) const {  // inclusive range
        double n = static_cast<double>(j - i + 1);
        double sum = s1[j + 1] - s1[i];
        double sq = s2[j + 1] - s2[i];
        return sq - sum * sum / n;
    }
};

}  // namespace

BreaksResult jenks_breaks(const std::vector<double>& values, int k) {
    if (values.empty()) throw NumericError("jenks_breaks needs a non-empty sequence");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::size_t distinct = std::set<double>(sorted.begin(), sorted.end()).size();
    if (k < 1 || static_cast<std::size_t>(k) > distinct)
        throw NumericError("class count k must lie in 1.." + std::to_string(distinct) +
                           " (number of distinct values), got " + std::to_string(k));

    const std::size_t n = sorted.size();
    SegmentCost cost(sorted);

    // opt[c][i]: minimal SDCM of partitioning sorted[i..n-1] into c classes.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> opt(static_cast<std::size_t>(k) + 1,
                                         std::vector<double>(n + 1, inf));
    for (std::size_t i = 0; i < n; ++i) opt[1][i] = cost(i, n - 1);
    for (int c = 2; c <= k; ++c) {
        for (std::size_t i = 0; i + static_cast<std::size_t>(c) <= n; ++i) {
            double best = inf;
            // last index of the first class leaves c-1 non-empty classes behind
            for (std::size_t e = i; e + static_cast<std::size_t>(c) - 1 <= n - 1; ++e) {
                double v = cost(i, e) + opt[c - 1][e + 1];
                if (v < best) best = v;
            }
            opt[static_cast<std::size_t>(c)][i] = best;
        }
    }

    // Walk forward taking the smallest class end that achieves the optimum;
    // this yields the lexicographically smallest breakpoint sequence.
    std::vector<std::size_t> ends;
    std::size_t start = 0;
    for (int c = k; c >= 1; --c) {
        if (c == 1) {
            ends.push_back(n - 1);
            break;
        }
        for (std::size_t e = start; e + static_cast<std::size_t>(c) - 1 <= n - 1; ++e) {
            if (cost(start, e) + opt[c - 1][e + 1] == opt[static_cast<std::size_t>(c)][start]) {
                ends.push_back(e);
                start = e + 1;
                break;
            }
        }
    }

    BreaksResult res;
    res.sdam = cost(0, n - 1);
    res.sdcm = 0.0;
    std::size_t lo = 0;
    for (std::size_t e : ends) {
        res.breakpoints.push_back(sorted[e]);
        res.class_counts.push_back(static_cast<long long>(e - lo + 1));
        res.sdcm += cost(lo, e);
        lo = e + 1;
    }
    for (std::size_t j = 0; j + 1 < res.breakpoints.size(); ++j) {
        if (!(res.breakpoints[j] < res.breakpoints[j + 1]))
            throw NumericError("jenks_breaks produced non-ascending breakpoints");
    }
    res.gvf = res.sdam == 0.0 ? 1.0 : 1.0 - res.sdcm / res.sdam;

    res.assignment.reserve(values.size());
    for (double v : values) res.assignment.push_back(classify_value(v, res.breakpoints));
    return res;
}

int classify_value(double value, const std::vector<double>& breakpoints) {
    if (breakpoints.empty()) throw NumericError("classify_value needs at least one breakpoint");
    for (std::size_t j = 0; j + 1 < breakpoints.size(); ++j)
        if (!(breakpoints[j] < breakpoints[j + 1]))
            throw NumericError("breakpoints must be strictly ascending");
    for (std::size_t j = 0; j < breakpoints.size(); ++j)
        if (value <= breakpoints[j]) return static_cast<int>(j) + 1;
    return static_cast<int>(breakpoints.size());
}

}  // namespace hetchoice
