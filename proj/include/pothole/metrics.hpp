#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pothole/dataset.hpp"

namespace pothole {

struct DetectionVerdict {
    std::size_t detection_index = 0;  // index into the input detection span
    double score = 0;
    bool true_positive = false;
    std::optional<std::size_t> annotation_index;  // engaged for true positives
    double iou = 0;  // IoU with the matched annotation, or best candidate IoU for FPs
};

struct MatchResult {
    std::vector<DetectionVerdict> verdicts;  // greedy order: descending score
    std::vector<bool> annotation_matched;
    std::size_t tp = 0, fp = 0, fn = 0;
    double iou_threshold = 0;
};

// Greedy per-image matching: detections are visited in descending score
// (ties: lexicographic box order) and matched to the unmatched annotation
// with the highest IoU (ties: lowest annotation index). The detection is a
// true positive iff that IoU reaches the threshold; annotations are consumed
// by at most one detection. Throws when records mix image ids or the
// threshold is outside (0, 1].
MatchResult match_image(std::span<const Annotation> annotations,
                        std::span<const Detection> detections, double iou_threshold);

struct PRPoint {
    double score = 0;
    std::size_t tp_cum = 0, fp_cum = 0;
    double precision = 0, recall = 0;
};

inline constexpr std::array<double, 11> kRecallLevels = {
    0.0, 1.0 / 10, 2.0 / 10, 3.0 / 10, 4.0 / 10, 5.0 / 10,
    6.0 / 10, 7.0 / 10, 8.0 / 10, 9.0 / 10, 1.0};

struct PRCurve {
    std::vector<PRPoint> points;            // one prefix per pooled detection
    std::array<double, 11> interpolated{};  // max precision at recall >= level
    std::size_t total_annotations = 0;
    std::size_t tp = 0, fp = 0, fn = 0;     // counts over the full detection set
    double iou_threshold = 0;
};

// Pools detections across images (descending score; ties by image id then
// box), runs per-image greedy matching, and accumulates the raw and
// interpolated precision-recall curve. Throws when the dataset has no
// annotations or a detection references an unknown image.
PRCurve pr_curve(const Dataset& dataset, std::span<const Detection> detections,
                 double iou_threshold);

struct APResult {
    double ap = 0;
    double iou_threshold = 0;
    std::string protocol;  // "PASCAL@<t>" or "COCO"
};

// Mean of the interpolated precision over the 11 recall levels.
APResult average_precision(const PRCurve& curve);

// Single-class mAP at one IoU threshold (0.5 standard, 0.4 relaxed).
APResult pascal_map(const Dataset& dataset, std::span<const Detection> detections,
                    double iou_threshold = 0.5);

// IoU thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> coco_thresholds();

// Mean of the 11-point AP over the ten COCO thresholds. Note this keeps the
// 11-point interpolation at every threshold; the official 101-point COCO
// average is intentionally not implemented.
APResult coco_map(const Dataset& dataset, std::span<const Detection> detections);

struct OperatingPoint {
    double score_threshold = 0;
    double precision = 0, recall = 0, f1 = 0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

// Prefix of the curve maximizing F1; ties resolve to the highest score
// threshold. Empty for an empty curve.
std::optional<OperatingPoint> best_f1_point(const PRCurve& curve);

// Writes the raw curve plus the 11 interpolated samples as CSV. Reals use
// fixed 12-decimal formatting so re-exporting a parsed file is byte-stable.
void export_curve(const PRCurve& curve, const std::filesystem::path& path);

}  // namespace pothole
