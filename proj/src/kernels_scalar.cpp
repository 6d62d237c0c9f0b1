#include "kernels_impl.hpp"

#include <algorithm>
#include <cmath>

namespace pothole::kernels::detail {

void iou_row_scalar(double qx0, double qy0, double qx1, double qy1,
                    const double* bx0, const double* by0, const double* bx1,
                    const double* by1, std::size_t n, double* out) noexcept {
    const double qarea = (qx1 - qx0) * (qy1 - qy0);
    for (std::size_t i = 0; i < n; ++i) {
        const double iw = std::max(0.0, std::min(qx1, bx1[i]) - std::max(qx0, bx0[i]));
        const double ih = std::max(0.0, std::min(qy1, by1[i]) - std::max(qy0, by0[i]));
        const double inter = iw * ih;
        const double barea = (bx1[i] - bx0[i]) * (by1[i] - by0[i]);
        const double uni = qarea + barea - inter;
        out[i] = inter / uni;
    }
}

void areas_scalar(const double* bx0, const double* by0, const double* bx1,
                  const double* by1, std::size_t n, double* out) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (bx1[i] - bx0[i]) * (by1[i] - by0[i]);
    }
}

double smooth_l1_sum_scalar(const double* x, std::size_t n) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(x[i]);
        sum += a < 1.0 ? 0.5 * (x[i] * x[i]) : a - 0.5;
    }
    return sum;
}

}  // namespace pothole::kernels::detail
