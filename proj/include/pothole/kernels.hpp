#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "pothole/box.hpp"

namespace pothole::kernels {

// Structure-of-arrays box storage feeding the batch kernels.
struct BoxArray {
    std::vector<double> x_min, y_min, x_max, y_max;

    void reserve(std::size_t n) {
        x_min.reserve(n);
        y_min.reserve(n);
        x_max.reserve(n);
        y_max.reserve(n);
    }

    void push_back(const BoundingBox& b) {
        x_min.push_back(b.x_min());
        y_min.push_back(b.y_min());
        x_max.push_back(b.x_max());
        y_max.push_back(b.y_max());
    }

    std::size_t size() const noexcept { return x_min.size(); }
    bool empty() const noexcept { return x_min.empty(); }
};

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend b) noexcept;
bool backend_available(Backend b) noexcept;
Backend active_backend() noexcept;

// Switches the dispatch target for all kernels. Returns false and leaves the
// active backend unchanged when the requested one is not available on this
// CPU. Not safe to call concurrently with running kernels.
bool set_backend(Backend b) noexcept;

// out[i] = IoU(query, boxes[i]). Bit-identical across backends.
void iou_row(const BoundingBox& query, const BoxArray& boxes, std::span<double> out);

// out[i] = width * height of boxes[i]. Bit-identical across backends.
void areas(const BoxArray& boxes, std::span<double> out);

// Sum of the piecewise smooth-L1 penalty (0.5 x^2 for |x| < 1, |x| - 0.5
// otherwise) over all residuals. Backends may differ in the last bits since
// the reduction order differs.
double smooth_l1_sum(std::span<const double> residuals) noexcept;

}  // namespace pothole::kernels
