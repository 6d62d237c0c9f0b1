#pragma once

#include <vector>

#include "pothole/box.hpp"

namespace pothole {

struct ScoredBox {
    BoundingBox box;
    double score = 0.0;

    friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

// Greedy non-maximum suppression: repeatedly keep the highest-score remaining
// box and drop every box whose IoU with it is >= iou_threshold. Output is
// sorted by descending score; equal scores fall back to lexicographic box
// order, so the result is deterministic.
std::vector<ScoredBox> nms(std::vector<ScoredBox> detections, double iou_threshold);

}  // namespace pothole
