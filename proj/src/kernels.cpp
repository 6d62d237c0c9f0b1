#include "pothole/kernels.hpp"

#include <stdexcept>

#include "kernels_impl.hpp"

namespace pothole::kernels {

namespace {

using IouRowFn = void (*)(double, double, double, double, const double*,
                          const double*, const double*, const double*,
                          std::size_t, double*) noexcept;
using AreasFn = void (*)(const double*, const double*, const double*,
                         const double*, std::size_t, double*) noexcept;
using SmoothL1Fn = double (*)(const double*, std::size_t) noexcept;

struct Vtable {
    IouRowFn iou_row;
    AreasFn areas;
    SmoothL1Fn smooth_l1_sum;
};

constexpr Vtable kScalarVtable{detail::iou_row_scalar, detail::areas_scalar,
                               detail::smooth_l1_sum_scalar};

#if defined(POTHOLE_HAVE_AVX2)
constexpr Vtable kAvx2Vtable{detail::iou_row_avx2, detail::areas_avx2,
                             detail::smooth_l1_sum_avx2};
#endif

Backend detect_backend() noexcept {
#if defined(POTHOLE_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) return Backend::kAvx2;
#endif
    return Backend::kScalar;
}

const Vtable* vtable_for(Backend b) noexcept {
#if defined(POTHOLE_HAVE_AVX2)
    if (b == Backend::kAvx2) return &kAvx2Vtable;
#endif
    (void)b;
    return &kScalarVtable;
}

Backend g_backend = detect_backend();
const Vtable* g_vtable = vtable_for(g_backend);

}  // namespace

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::kScalar: return "scalar";
        case Backend::kAvx2: return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend b) noexcept {
    if (b == Backend::kScalar) return true;
#if defined(POTHOLE_HAVE_AVX2)
    if (b == Backend::kAvx2) return __builtin_cpu_supports("avx2");
#endif
    return false;
}

Backend active_backend() noexcept { return g_backend; }

bool set_backend(Backend b) noexcept {
    if (!backend_available(b)) return false;
    g_backend = b;
    g_vtable = vtable_for(b);
    return true;
}

void iou_row(const BoundingBox& query, const BoxArray& boxes, std::span<double> out) {
    if (out.size() != boxes.size()) {
        throw std::invalid_argument("iou_row: output span size mismatch");
    }
    g_vtable->iou_row(query.x_min(), query.y_min(), query.x_max(), query.y_max(),
                      boxes.x_min.data(), boxes.y_min.data(), boxes.x_max.data(),
                      boxes.y_max.data(), boxes.size(), out.data());
}

void areas(const BoxArray& boxes, std::span<double> out) {
    if (out.size() != boxes.size()) {
        throw std::invalid_argument("areas: output span size mismatch");
    }
    g_vtable->areas(boxes.x_min.data(), boxes.y_min.data(), boxes.x_max.data(),
                    boxes.y_max.data(), boxes.size(), out.data());
}

double smooth_l1_sum(std::span<const double> residuals) noexcept {
    return g_vtable->smooth_l1_sum(residuals.data(), residuals.size());
}

}  // namespace pothole::kernels
