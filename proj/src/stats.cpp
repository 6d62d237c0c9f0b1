#include "pothole/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pothole {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BoxplotSummary boxplot(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("boxplot of empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    BoxplotSummary s;
    s.n = sorted.size();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    s.iqr = s.q3 - s.q1;
    s.lower_limit = s.q1 - 1.5 * s.iqr;
    s.upper_limit = s.q3 + 1.5 * s.iqr;

    // Quartiles always sit inside the fences, so both whiskers exist.
    s.lower_whisker = s.upper_limit;
    s.upper_whisker = s.lower_limit;
    for (double v : sorted) {
        if (v < s.lower_limit || v > s.upper_limit) {
            s.outliers.push_back(v);
        } else {
            s.lower_whisker = std::min(s.lower_whisker, v);
            s.upper_whisker = std::max(s.upper_whisker, v);
        }
    }
    return s;
}

std::vector<double> aspect_ratios(const Dataset& dataset) {
    if (dataset.annotations().empty()) {
        throw std::invalid_argument("aspect_ratios: dataset has no annotations");
    }
    std::vector<double> ratios;
    ratios.reserve(dataset.annotations().size());
    for (const Annotation& a : dataset.annotations()) {
        ratios.push_back(a.box.width() / a.box.height());
    }
    return ratios;
}

TuningRecommendation recommend_tuning(const Dataset& dataset,
                                      std::span<const std::pair<int, int>> candidate_resolutions) {
    if (dataset.annotations().empty()) {
        throw std::invalid_argument("recommend_tuning: dataset has no annotations");
    }

    std::vector<double> areas;
    std::vector<double> fractions;
    areas.reserve(dataset.annotations().size());
    fractions.reserve(dataset.annotations().size());
    for (const Annotation& a : dataset.annotations()) {
        const ImageRecord* img = dataset.find_image(a.image_id);
        const double area = a.box.area();
        areas.push_back(area);
        fractions.push_back(area / (img->width * img->height));
    }
    std::sort(areas.begin(), areas.end());
    std::sort(fractions.begin(), fractions.end());

    TuningRecommendation rec;
    rec.median_area_px = quantile_sorted(areas, 0.5);
    rec.median_area_fraction = quantile_sorted(fractions, 0.5);

    const BoxplotSummary ratio_summary = boxplot(aspect_ratios(dataset));
    rec.aspect_ratio_set = {0.5, 1.0, 2.0};
    const long hi = std::min<long>(
        4, std::lround(std::max(ratio_summary.q3, ratio_summary.upper_whisker)));
    for (long k = 3; k <= hi; ++k) {
        rec.aspect_ratio_set.push_back(static_cast<double>(k));
    }

    for (const auto& [w, h] : candidate_resolutions) {
        if (w <= 0 || h <= 0) {
            throw std::invalid_argument("recommend_tuning: resolutions must be positive");
        }
        rec.projected_area_at[{w, h}] =
            rec.median_area_fraction * static_cast<double>(w) * static_cast<double>(h);
    }
    return rec;
}

}  // namespace pothole
