#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <tuple>

namespace pothole {

// Axis-aligned rectangle in pixel coordinates, half-open on both axes:
// pixel (px, py) lies inside iff x_min <= px < x_max and y_min <= py < y_max.
// Width and height are strictly positive; degenerate or non-finite boxes are
// rejected at construction.
class BoundingBox {
public:
    BoundingBox(double x_min, double y_min, double x_max, double y_max)
        : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
        if (!valid(x_min, y_min, x_max, y_max)) {
            throw std::invalid_argument(
                "BoundingBox: coordinates must be finite with x_max > x_min and y_max > y_min");
        }
    }

    static std::optional<BoundingBox> make(double x_min, double y_min,
                                           double x_max, double y_max) noexcept {
        if (!valid(x_min, y_min, x_max, y_max)) return std::nullopt;
        return BoundingBox(Unchecked{}, x_min, y_min, x_max, y_max);
    }

    static bool valid(double x_min, double y_min, double x_max, double y_max) noexcept {
        return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
               std::isfinite(y_max) && x_max > x_min && y_max > y_min;
    }

    double x_min() const noexcept { return x_min_; }
    double y_min() const noexcept { return y_min_; }
    double x_max() const noexcept { return x_max_; }
    double y_max() const noexcept { return y_max_; }

    double width() const noexcept { return x_max_ - x_min_; }
    double height() const noexcept { return y_max_ - y_min_; }
    double area() const noexcept { return width() * height(); }
    double center_x() const noexcept { return 0.5 * (x_min_ + x_max_); }
    double center_y() const noexcept { return 0.5 * (y_min_ + y_max_); }

    BoundingBox scaled(double s) const {
        return BoundingBox(x_min_ * s, y_min_ * s, x_max_ * s, y_max_ * s);
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

private:
    struct Unchecked {};
    BoundingBox(Unchecked, double x0, double y0, double x1, double y1) noexcept
        : x_min_(x0), y_min_(y0), x_max_(x1), y_max_(y1) {}

    double x_min_, y_min_, x_max_, y_max_;
};

// Lexicographic order on (x_min, y_min, x_max, y_max); the deterministic
// tie-break used whenever scores compare equal.
inline bool lex_less(const BoundingBox& a, const BoundingBox& b) noexcept {
    return std::make_tuple(a.x_min(), a.y_min(), a.x_max(), a.y_max()) <
           std::make_tuple(b.x_min(), b.y_min(), b.x_max(), b.y_max());
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double iw = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min()));
    const double ih = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min()));
    return iw * ih;
}

// Intersection over union in [0, 1]; 0 for disjoint or merely touching boxes,
// exactly 1 for identical ones. The operation sequence here is mirrored by
// the batch kernels, which keeps scalar and SIMD results bit-identical.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return inter / uni;  // uni > 0: both boxes have positive area
}

}  // namespace pothole
