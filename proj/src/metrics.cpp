#include "pothole/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "pothole/kernels.hpp"

namespace pothole {

namespace {

bool detection_order(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return lex_less(a.box, b.box);
}

std::string format_threshold(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12f", v);
    return buf;
}

}  // namespace

MatchResult match_image(std::span<const Annotation> annotations,
                        std::span<const Detection> detections, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw std::invalid_argument("match_image: iou_threshold must lie in (0, 1]");
    }
    std::string_view image_id;
    if (!annotations.empty()) image_id = annotations.front().image_id;
    else if (!detections.empty()) image_id = detections.front().image_id;
    for (const Annotation& a : annotations) {
        if (a.image_id != image_id) throw std::invalid_argument("match_image: mixed image ids");
    }
    for (const Detection& d : detections) {
        if (d.image_id != image_id) throw std::invalid_argument("match_image: mixed image ids");
    }

    std::vector<std::size_t> order(detections.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detection_order(detections[a], detections[b]);
    });

    kernels::BoxArray gt;
    gt.reserve(annotations.size());
    for (const Annotation& a : annotations) gt.push_back(a.box);

    MatchResult result;
    result.iou_threshold = iou_threshold;
    result.annotation_matched.assign(annotations.size(), false);
    result.verdicts.reserve(detections.size());

    std::vector<double> row(annotations.size());
    for (const std::size_t det_idx : order) {
        DetectionVerdict v;
        v.detection_index = det_idx;
        v.score = detections[det_idx].score;

        if (!gt.empty()) {
            kernels::iou_row(detections[det_idx].box, gt, row);
            std::size_t best = annotations.size();
            double best_iou = -1.0;
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (result.annotation_matched[j]) continue;
                if (row[j] > best_iou) {  // strict: IoU ties keep the lowest index
                    best_iou = row[j];
                    best = j;
                }
            }
            if (best != annotations.size()) {
                v.iou = best_iou;
                if (best_iou >= iou_threshold) {
                    v.true_positive = true;
                    v.annotation_index = best;
                    result.annotation_matched[best] = true;
                }
            }
        }
        v.true_positive ? ++result.tp : ++result.fp;
        result.verdicts.push_back(std::move(v));
    }
    result.fn = annotations.size() - result.tp;
    return result;
}

PRCurve pr_curve(const Dataset& dataset, std::span<const Detection> detections,
                 double iou_threshold) {
    if (dataset.annotations().empty()) {
        throw std::invalid_argument("pr_curve: dataset has no annotations (recall undefined)");
    }

    // Group by image; std::map keeps image order deterministic.
    std::map<std::string, std::vector<Annotation>> gt_by_image;
    for (const Annotation& a : dataset.annotations()) gt_by_image[a.image_id].push_back(a);
    std::map<std::string, std::vector<Detection>> det_by_image;
    for (const Detection& d : detections) {
        if (!dataset.has_image(d.image_id)) {
            throw std::invalid_argument("pr_curve: detection references unknown image " + d.image_id);
        }
        det_by_image[d.image_id].push_back(d);
    }

    struct PooledVerdict {
        double score;
        std::string_view image_id;
        const BoundingBox* box;
        bool true_positive;
    };
    std::vector<PooledVerdict> pooled;
    pooled.reserve(detections.size());
    static const std::vector<Annotation> kNoAnnotations;
    for (const auto& [image_id, dets] : det_by_image) {
        const auto git = gt_by_image.find(image_id);
        const auto& gts = git == gt_by_image.end() ? kNoAnnotations : git->second;
        const MatchResult m = match_image(gts, dets, iou_threshold);
        for (const DetectionVerdict& v : m.verdicts) {
            pooled.push_back({v.score, image_id, &dets[v.detection_index].box, v.true_positive});
        }
    }
    std::sort(pooled.begin(), pooled.end(), [](const PooledVerdict& a, const PooledVerdict& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        return lex_less(*a.box, *b.box);
    });

    PRCurve curve;
    curve.iou_threshold = iou_threshold;
    curve.total_annotations = dataset.annotations().size();
    curve.points.reserve(pooled.size());
    const double total_gt = static_cast<double>(curve.total_annotations);
    std::size_t tp_cum = 0, fp_cum = 0;
    for (const PooledVerdict& v : pooled) {
        v.true_positive ? ++tp_cum : ++fp_cum;
        PRPoint p;
        p.score = v.score;
        p.tp_cum = tp_cum;
        p.fp_cum = fp_cum;
        p.precision = static_cast<double>(tp_cum) / static_cast<double>(tp_cum + fp_cum);
        p.recall = static_cast<double>(tp_cum) / total_gt;
        curve.points.push_back(p);
    }
    curve.tp = tp_cum;
    curve.fp = fp_cum;
    curve.fn = curve.total_annotations - tp_cum;

    // interpolated precision: max over all curve points with recall >= level
    for (std::size_t i = 0; i < kRecallLevels.size(); ++i) {
        double best = 0.0;
        for (const PRPoint& p : curve.points) {
            if (p.recall >= kRecallLevels[i]) best = std::max(best, p.precision);
        }
        curve.interpolated[i] = best;
    }
    return curve;
}

APResult average_precision(const PRCurve& curve) {
    double sum = 0.0;
    for (double p : curve.interpolated) sum += p;
    return {sum / 11.0, curve.iou_threshold,
            "PASCAL@" + format_threshold(curve.iou_threshold)};
}

APResult pascal_map(const Dataset& dataset, std::span<const Detection> detections,
                    double iou_threshold) {
    // single class: mAP over classes equals AP
    return average_precision(pr_curve(dataset, detections, iou_threshold));
}

std::array<double, 10> coco_thresholds() {
    std::array<double, 10> t{};
    for (int i = 0; i < 10; ++i) t[i] = static_cast<double>(50 + 5 * i) / 100.0;
    return t;
}

APResult coco_map(const Dataset& dataset, std::span<const Detection> detections) {
    double sum = 0.0;
    for (double t : coco_thresholds()) {
        sum += average_precision(pr_curve(dataset, detections, t)).ap;
    }
    return {sum / 10.0, 0.0, "COCO"};
}

std::optional<OperatingPoint> best_f1_point(const PRCurve& curve) {
    std::optional<OperatingPoint> best;
    for (const PRPoint& p : curve.points) {
        const double denom = p.precision + p.recall;
        const double f1 = denom > 0.0 ? 2.0 * p.precision * p.recall / denom : 0.0;
        if (!best || f1 > best->f1) {
            best = OperatingPoint{p.score, p.precision, p.recall, f1,
                                  p.tp_cum, p.fp_cum, curve.total_annotations - p.tp_cum};
        }
    }
    return best;
}

void export_curve(const PRCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "score,tp_cum,fp_cum,precision,recall\n";
    if (curve.points.empty()) return;  // header-only file for an empty curve
    for (const PRPoint& p : curve.points) {
        out << format_real(p.score) << ',' << p.tp_cum << ',' << p.fp_cum << ','
            << format_real(p.precision) << ',' << format_real(p.recall) << '\n';
    }
    out << "recall_level,interpolated_precision\n";
    for (std::size_t i = 0; i < kRecallLevels.size(); ++i) {
        out << format_real(kRecallLevels[i]) << ',' << format_real(curve.interpolated[i]) << '\n';
    }
}

}  // namespace pothole
