#pragma once

#include <cstddef>

// Per-backend kernel entry points. The scalar versions double as the tail
// handler for the vectorized ones, so every backend must keep the exact
// operation sequence documented in box.hpp.

namespace pothole::kernels::detail {

void iou_row_scalar(double qx0, double qy0, double qx1, double qy1,
                    const double* bx0, const double* by0, const double* bx1,
                    const double* by1, std::size_t n, double* out) noexcept;

void areas_scalar(const double* bx0, const double* by0, const double* bx1,
                  const double* by1, std::size_t n, double* out) noexcept;

double smooth_l1_sum_scalar(const double* x, std::size_t n) noexcept;

#if defined(POTHOLE_HAVE_AVX2)
void iou_row_avx2(double qx0, double qy0, double qx1, double qy1,
                  const double* bx0, const double* by0, const double* bx1,
                  const double* by1, std::size_t n, double* out) noexcept;

void areas_avx2(const double* bx0, const double* by0, const double* bx1,
                const double* by1, std::size_t n, double* out) noexcept;

double smooth_l1_sum_avx2(const double* x, std::size_t n) noexcept;
#endif

}  // namespace pothole::kernels::detail
