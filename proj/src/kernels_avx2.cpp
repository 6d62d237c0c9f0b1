#include "kernels_impl.hpp"

#if defined(POTHOLE_HAVE_AVX2)

#include <immintrin.h>

namespace pothole::kernels::detail {

namespace {

inline double hsum_pd(__m256d v) noexcept {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void iou_row_avx2(double qx0, double qy0, double qx1, double qy1,
                  const double* bx0, const double* by0, const double* bx1,
                  const double* by1, std::size_t n, double* out) noexcept {
    const std::size_t na = n / 4 * 4;
    const __m256d vqx0 = _mm256_set1_pd(qx0);
    const __m256d vqy0 = _mm256_set1_pd(qy0);
    const __m256d vqx1 = _mm256_set1_pd(qx1);
    const __m256d vqy1 = _mm256_set1_pd(qy1);
    const __m256d vqarea = _mm256_set1_pd((qx1 - qx0) * (qy1 - qy0));
    const __m256d zero = _mm256_setzero_pd();
    for (std::size_t i = 0; i < na; i += 4) {
        const __m256d x0 = _mm256_loadu_pd(bx0 + i);
        const __m256d y0 = _mm256_loadu_pd(by0 + i);
        const __m256d x1 = _mm256_loadu_pd(bx1 + i);
        const __m256d y1 = _mm256_loadu_pd(by1 + i);
        const __m256d iw = _mm256_max_pd(
            zero, _mm256_sub_pd(_mm256_min_pd(vqx1, x1), _mm256_max_pd(vqx0, x0)));
        const __m256d ih = _mm256_max_pd(
            zero, _mm256_sub_pd(_mm256_min_pd(vqy1, y1), _mm256_max_pd(vqy0, y0)));
        const __m256d inter = _mm256_mul_pd(iw, ih);
        const __m256d barea =
            _mm256_mul_pd(_mm256_sub_pd(x1, x0), _mm256_sub_pd(y1, y0));
        const __m256d uni = _mm256_sub_pd(_mm256_add_pd(vqarea, barea), inter);
        _mm256_storeu_pd(out + i, _mm256_div_pd(inter, uni));
    }
    iou_row_scalar(qx0, qy0, qx1, qy1, bx0 + na, by0 + na, bx1 + na, by1 + na,
                   n - na, out + na);
}

void areas_avx2(const double* bx0, const double* by0, const double* bx1,
                const double* by1, std::size_t n, double* out) noexcept {
    const std::size_t na = n / 4 * 4;
    for (std::size_t i = 0; i < na; i += 4) {
        const __m256d w = _mm256_sub_pd(_mm256_loadu_pd(bx1 + i), _mm256_loadu_pd(bx0 + i));
        const __m256d h = _mm256_sub_pd(_mm256_loadu_pd(by1 + i), _mm256_loadu_pd(by0 + i));
        _mm256_storeu_pd(out + i, _mm256_mul_pd(w, h));
    }
    areas_scalar(bx0 + na, by0 + na, bx1 + na, by1 + na, n - na, out + na);
}

double smooth_l1_sum_avx2(const double* x, std::size_t n) noexcept {
    const std::size_t na = n / 4 * 4;
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < na; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d a = _mm256_andnot_pd(sign_mask, v);
        const __m256d quad = _mm256_mul_pd(half, _mm256_mul_pd(v, v));
        const __m256d lin = _mm256_sub_pd(a, half);
        const __m256d below = _mm256_cmp_pd(a, one, _CMP_LT_OQ);
        acc = _mm256_add_pd(acc, _mm256_blendv_pd(lin, quad, below));
    }
    return hsum_pd(acc) + smooth_l1_sum_scalar(x + na, n - na);
}

}  // namespace pothole::kernels::detail

#endif  // POTHOLE_HAVE_AVX2
