#include "pothole/nms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pothole/kernels.hpp"

namespace pothole {

std::vector<ScoredBox> nms(std::vector<ScoredBox> detections, double iou_threshold) {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
        throw std::invalid_argument("nms: iou_threshold must lie in [0, 1]");
    }
    for (const ScoredBox& d : detections) {
        if (!std::isfinite(d.score)) {
            throw std::invalid_argument("nms: detection scores must be finite");
        }
    }

    std::sort(detections.begin(), detections.end(),
              [](const ScoredBox& a, const ScoredBox& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return lex_less(a.box, b.box);
              });

    const std::size_t n = detections.size();
    kernels::BoxArray boxes;
    boxes.reserve(n);
    for (const ScoredBox& d : detections) boxes.push_back(d.box);

    std::vector<char> suppressed(n, 0);
    std::vector<double> row(n);
    std::vector<ScoredBox> kept;
    for (std::size_t i = 0; i < n; ++i) {
        if (suppressed[i]) continue;
        kept.push_back(detections[i]);
        kernels::iou_row(detections[i].box, boxes, row);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!suppressed[j] && row[j] >= iou_threshold) suppressed[j] = 1;
        }
    }
    return kept;
}

}  // namespace pothole
