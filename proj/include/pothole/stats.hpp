#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pothole/dataset.hpp"

namespace pothole {

// Five-number boxplot summary with Tukey fences. Whiskers are the most
// extreme samples still inside the fences; everything outside is an outlier.
struct BoxplotSummary {
    double q1 = 0, median = 0, q3 = 0;
    double iqr = 0;                       // q3 - q1
    double lower_limit = 0;               // q1 - 1.5 * iqr
    double upper_limit = 0;               // q3 + 1.5 * iqr
    double lower_whisker = 0;             // min sample >= lower_limit
    double upper_whisker = 0;             // max sample <= upper_limit
    std::vector<double> outliers;         // sorted ascending
    std::size_t n = 0;
};

// Linear interpolation between order statistics at position (n - 1) * q,
// zero-indexed. `sorted` must be ascending and non-empty; q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Throws std::invalid_argument on an empty sample.
BoxplotSummary boxplot(std::span<const double> values);

// width / height of every annotation, in dataset order. Potholes are wider
// than tall, so typical values are above 1. Throws on an empty annotation set.
std::vector<double> aspect_ratios(const Dataset& dataset);

struct TuningRecommendation {
    std::vector<double> aspect_ratio_set;  // sorted ascending
    double median_area_px = 0;             // median annotation area
    double median_area_fraction = 0;       // median of area / image area
    // projected median pothole area (px^2) at each candidate input resolution
    std::map<std::pair<int, int>, double> projected_area_at;
};

// Derives anchor aspect ratios and projected object sizes from the annotation
// distribution. The ratio set starts from {0.5, 1, 2} and is extended with
// every integer above 2 up to the rounded maximum of q3 and the upper
// whisker, capped at 4.
TuningRecommendation recommend_tuning(const Dataset& dataset,
                                      std::span<const std::pair<int, int>> candidate_resolutions);

}  // namespace pothole
