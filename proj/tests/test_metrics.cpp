#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "pothole/metrics.hpp"
#include "test_util.hpp"

using namespace pothole;
using testutil::TempDir;

namespace {

// 1 image, 2 ground truths; detections ranked TP, FP, TP. AP = 28/33.
struct WorkedExample {
    Dataset dataset;
    std::vector<Detection> detections;

    WorkedExample() {
        dataset.add_image({"img1", 100, 100, ""});
        dataset.add_annotation({"img1", BoundingBox(0, 0, 10, 10)});
        dataset.add_annotation({"img1", BoundingBox(50, 50, 60, 60)});
        detections = {{"img1", BoundingBox(0, 0, 10, 10), 0.9},
                      {"img1", BoundingBox(80, 80, 90, 90), 0.8},
                      {"img1", BoundingBox(50, 50, 60, 60), 0.7}};
    }
};

std::vector<Detection> perfect_detections(const Dataset& ds) {
    std::vector<Detection> dets;
    double score = 0.95;
    for (const Annotation& a : ds.annotations()) {
        dets.push_back({a.image_id, a.box, score});
        score -= 0.01;
    }
    return dets;
}

}  // namespace

TEST_CASE("match_image: identical box is a true positive") {
    Dataset ds;
    ds.add_image({"a", 100, 100, ""});
    const std::vector<Annotation> gt = {{"a", BoundingBox(10, 10, 30, 30)}};
    const std::vector<Detection> det = {{"a", BoundingBox(10, 10, 30, 30), 0.9}};
    const MatchResult m = match_image(gt, det, 0.5);
    CHECK(m.tp == 1);
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
    REQUIRE(m.verdicts.size() == 1);
    CHECK(m.verdicts[0].true_positive);
    CHECK(m.verdicts[0].iou == 1.0);
    CHECK(m.verdicts[0].annotation_index == 0);
}

TEST_CASE("match_image: duplicate detection becomes a false positive") {
    const std::vector<Annotation> gt = {{"a", BoundingBox(10, 10, 30, 30)}};
    const std::vector<Detection> det = {{"a", BoundingBox(10, 10, 30, 30), 0.9},
                                        {"a", BoundingBox(10, 10, 30, 30), 0.8}};
    const MatchResult m = match_image(gt, det, 0.5);
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 0);
    CHECK(m.verdicts[0].score == 0.9);
    CHECK(m.verdicts[0].true_positive);
    CHECK_FALSE(m.verdicts[1].true_positive);
}

TEST_CASE("match_image: higher-score detection below threshold does not consume the annotation") {
    // A (score 0.9) overlaps g at IoU 1/3 < 0.5 -> FP; B (score 0.8) at
    // IoU 0.8 >= 0.5 -> TP on the still-unmatched g.
    const std::vector<Annotation> gt = {{"a", BoundingBox(0, 0, 10, 10)}};
    const std::vector<Detection> det = {{"a", BoundingBox(5, 0, 15, 10), 0.9},
                                        {"a", BoundingBox(0, 0, 10, 8), 0.8}};
    const MatchResult m = match_image(gt, det, 0.5);
    REQUIRE(m.verdicts.size() == 2);
    CHECK_FALSE(m.verdicts[0].true_positive);
    CHECK(m.verdicts[0].iou == doctest::Approx(1.0 / 3.0));
    CHECK(m.verdicts[1].true_positive);
    CHECK(m.verdicts[1].iou == doctest::Approx(0.8));
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 0);
}

TEST_CASE("match_image rejects mixed image ids and bad thresholds") {
    const std::vector<Annotation> gt = {{"a", BoundingBox(0, 0, 10, 10)}};
    const std::vector<Detection> det = {{"b", BoundingBox(0, 0, 10, 10), 0.9}};
    CHECK_THROWS_AS(match_image(gt, det, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(match_image(gt, {}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(match_image(gt, {}, 1.1), std::invalid_argument);
}

TEST_CASE("pr_curve on a perfect detector ends at (1, 1)") {
    WorkedExample ex;
    const auto dets = perfect_detections(ex.dataset);
    const PRCurve curve = pr_curve(ex.dataset, dets, 0.5);
    REQUIRE_FALSE(curve.points.empty());
    CHECK(curve.points.back().recall == 1.0);
    CHECK(curve.points.back().precision == 1.0);
    for (double p : curve.interpolated) CHECK(p == 1.0);
    CHECK(average_precision(curve).ap == 1.0);
}

TEST_CASE("pr_curve with zero detections is empty and AP is 0") {
    WorkedExample ex;
    const PRCurve curve = pr_curve(ex.dataset, {}, 0.5);
    CHECK(curve.points.empty());
    for (double p : curve.interpolated) CHECK(p == 0.0);
    CHECK(average_precision(curve).ap == 0.0);
    CHECK(curve.fn == 2);
}

TEST_CASE("pr_curve rejects a dataset without annotations") {
    Dataset ds;
    ds.add_image({"a", 10, 10, ""});
    CHECK_THROWS_AS(pr_curve(ds, {}, 0.5), std::invalid_argument);
}

TEST_CASE("worked example: raw points and 11-point AP = 28/33") {
    WorkedExample ex;
    const PRCurve curve = pr_curve(ex.dataset, ex.detections, 0.5);
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[0].recall == 0.5);
    CHECK(curve.points[0].precision == 1.0);
    CHECK(curve.points[1].recall == 0.5);
    CHECK(curve.points[1].precision == 0.5);
    CHECK(curve.points[2].recall == 1.0);
    CHECK(curve.points[2].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const APResult ap = average_precision(curve);
    CHECK(std::fabs(ap.ap - 28.0 / 33.0) <= 1e-12);
    CHECK(ap.protocol == "PASCAL@0.50");

    // oracle agreement on the same instance
    oracle::Instance inst;
    inst.annotations["img1"] = {{0, 0, 10, 10}, {50, 50, 60, 60}};
    inst.detections["img1"] = {{{0, 0, 10, 10}, 0.9},
                               {{80, 80, 90, 90}, 0.8},
                               {{50, 50, 60, 60}, 0.7}};
    CHECK(std::fabs(oracle::eleven_point_ap(inst, 0.5) - ap.ap) <= 1e-15);
}

TEST_CASE("pascal thresholds: 0.4 admits what 0.5 rejects") {
    Dataset ds;
    ds.add_image({"a", 100, 100, ""});
    ds.add_annotation({"a", BoundingBox(0, 0, 10, 10)});
    // IoU = 45/155 ... pick a box with IoU between 0.4 and 0.5:
    // (0,0,10,9) vs (0,0,10,10): inter 90, union 100 -> 0.9; too high.
    // (0, 0, 10, 4.5): inter 45, union 100 -> 0.45
    const std::vector<Detection> det = {{"a", BoundingBox(0, 0, 10, 4.5), 0.9}};
    CHECK(pascal_map(ds, det, 0.5).ap == 0.0);
    CHECK(pascal_map(ds, det, 0.4).ap == 1.0);
}

TEST_CASE("a pair at exactly the threshold is a true positive") {
    Dataset ds;
    ds.add_image({"a", 100, 100, ""});
    ds.add_annotation({"a", BoundingBox(0, 0, 1, 1)});
    const std::vector<Detection> det = {{"a", BoundingBox(0, 0, 1, 0.5), 0.9}};  // IoU 0.5 exact
    const PRCurve curve = pr_curve(ds, det, 0.5);
    CHECK(curve.tp == 1);
}

TEST_CASE("coco map of a perfect detector is 1") {
    WorkedExample ex;
    const auto dets = perfect_detections(ex.dataset);
    const APResult result = coco_map(ex.dataset, dets);
    CHECK(result.ap == 1.0);
    CHECK(result.protocol == "COCO");
}

TEST_CASE("coco map with IoU exactly 0.5 equals AP@0.5 / 10") {
    Dataset ds;
    ds.add_image({"a", 100, 100, ""});
    ds.add_annotation({"a", BoundingBox(0, 0, 1, 1)});
    ds.add_annotation({"a", BoundingBox(10, 10, 12, 12)});
    const std::vector<Detection> det = {
        {"a", BoundingBox(0, 0, 1, 0.5), 0.9},    // IoU 0.5 with first GT
        {"a", BoundingBox(10, 10, 12, 11), 0.8},  // IoU 0.5 with second GT
    };
    const double ap_at_half = pascal_map(ds, det, 0.5).ap;
    CHECK(ap_at_half > 0.0);
    CHECK(coco_map(ds, det).ap == doctest::Approx(ap_at_half / 10.0).epsilon(1e-15));
}

TEST_CASE("coco map with zero detections is 0") {
    WorkedExample ex;
    CHECK(coco_map(ex.dataset, {}).ap == 0.0);
}

TEST_CASE("AP equals the brute-force oracle on randomized instances") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> thr_dist(0.25, 0.85);
    for (int trial = 0; trial < 60; ++trial) {
        const oracle::Instance inst = testutil::random_instance(rng);
        const auto [ds, dets] = testutil::to_pothole(inst);
        const double thr = trial % 2 == 0 ? 0.5 : thr_dist(rng);
        const double expected = oracle::eleven_point_ap(inst, thr);
        const double actual = average_precision(pr_curve(ds, dets, thr)).ap;
        CHECK(std::fabs(actual - expected) <= 1e-12);
    }
}

TEST_CASE("metrics are invariant to detection input order when scores are distinct") {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 20; ++trial) {
        oracle::Instance inst = testutil::random_instance(rng);
        // force distinct scores
        std::size_t i = 0, total = 0;
        for (auto& [id, dets] : inst.detections) total += dets.size();
        for (auto& [id, dets] : inst.detections) {
            for (auto& d : dets) d.score = static_cast<double>(++i) / (total + 1.0);
        }
        auto [ds, dets] = testutil::to_pothole(inst);
        const double base = average_precision(pr_curve(ds, dets, 0.5)).ap;
        for (int shuffle = 0; shuffle < 5; ++shuffle) {
            std::shuffle(dets.begin(), dets.end(), rng);
            CHECK(average_precision(pr_curve(ds, dets, 0.5)).ap == base);
        }
    }
}

TEST_CASE("verdicts and AP are invariant to uniform scaling") {
    std::mt19937_64 rng(79);
    for (double s : {2.0, 3.5, 0.25}) {
        const oracle::Instance inst = testutil::random_instance(rng);
        const auto [ds, dets] = testutil::to_pothole(inst);

        Dataset scaled_ds;
        for (const ImageRecord& img : ds.images()) {
            scaled_ds.add_image({img.image_id, img.width * s, img.height * s, img.source_tag});
        }
        for (const Annotation& a : ds.annotations()) {
            scaled_ds.add_annotation({a.image_id, a.box.scaled(s)});
        }
        std::vector<Detection> scaled_dets;
        for (const Detection& d : dets) {
            scaled_dets.push_back({d.image_id, d.box.scaled(s), d.score});
        }

        const PRCurve base = pr_curve(ds, dets, 0.5);
        const PRCurve scaled = pr_curve(scaled_ds, scaled_dets, 0.5);
        REQUIRE(base.points.size() == scaled.points.size());
        for (std::size_t i = 0; i < base.points.size(); ++i) {
            CHECK(base.points[i].tp_cum == scaled.points[i].tp_cum);
            CHECK(base.points[i].fp_cum == scaled.points[i].fp_cum);
        }
        CHECK(average_precision(base).ap == average_precision(scaled).ap);
    }
}

TEST_CASE("a trailing unmatched detection below all scores leaves AP unchanged") {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 20; ++trial) {
        const oracle::Instance inst = testutil::random_instance(rng);
        auto [ds, dets] = testutil::to_pothole(inst);
        const double base = average_precision(pr_curve(ds, dets, 0.5)).ap;

        double min_score = 1.0;
        for (const Detection& d : dets) min_score = std::min(min_score, d.score);
        if (min_score <= 0.0) continue;
        // an image with no ground truth guarantees the new detection matches nothing
        ds.add_image({"zz_empty", 100, 100, ""});
        dets.push_back({"zz_empty", BoundingBox(40, 40, 60, 60), min_score * 0.5});
        const double with_fp = average_precision(pr_curve(ds, dets, 0.5)).ap;
        CHECK(with_fp == base);
    }
}

TEST_CASE("every matched pair satisfies IoU >= threshold") {
    std::mt19937_64 rng(89);
    std::uniform_real_distribution<double> thr_dist(0.2, 0.9);
    for (int trial = 0; trial < 50; ++trial) {
        const oracle::Instance inst = testutil::random_instance(rng);
        const double thr = thr_dist(rng);
        for (const auto& [image, dets] : inst.detections) {
            std::vector<Annotation> gt;
            const auto git = inst.annotations.find(image);
            if (git != inst.annotations.end()) {
                for (const oracle::Box& b : git->second) {
                    gt.push_back({image, BoundingBox(b.x0, b.y0, b.x1, b.y1)});
                }
            }
            std::vector<Detection> det;
            for (const oracle::Det& d : dets) {
                det.push_back({image, BoundingBox(d.box.x0, d.box.y0, d.box.x1, d.box.y1),
                               d.score});
            }
            const MatchResult m = match_image(gt, det, thr);
            CHECK(m.tp + m.fp == det.size());
            CHECK(m.tp + m.fn == gt.size());
            std::vector<bool> seen(gt.size(), false);
            for (const DetectionVerdict& v : m.verdicts) {
                if (!v.true_positive) continue;
                CHECK(v.iou >= thr);
                REQUIRE(v.annotation_index.has_value());
                CHECK_FALSE(seen[*v.annotation_index]);  // single match per annotation
                seen[*v.annotation_index] = true;
            }
        }
    }
}

TEST_CASE("re-filtering matches at a stricter threshold never improves precision or recall") {
    std::mt19937_64 rng(97);
    for (int trial = 0; trial < 30; ++trial) {
        const oracle::Instance inst = testutil::random_instance(rng, {.max_images = 1});
        std::vector<Annotation> gt;
        for (const oracle::Box& b : inst.annotations.at("img0")) {
            gt.push_back({"img0", BoundingBox(b.x0, b.y0, b.x1, b.y1)});
        }
        std::vector<Detection> det;
        for (const oracle::Det& d : inst.detections.at("img0")) {
            det.push_back({"img0", BoundingBox(d.box.x0, d.box.y0, d.box.x1, d.box.y1), d.score});
        }
        if (det.empty() || gt.empty()) continue;

        const double t = 0.3;
        const MatchResult m = match_image(gt, det, t);
        for (double stricter : {0.5, 0.7, 0.9}) {
            std::size_t tp = 0;
            for (const DetectionVerdict& v : m.verdicts) {
                if (v.true_positive && v.iou >= stricter) ++tp;
            }
            const std::size_t fp = det.size() - tp;
            const std::size_t fn = gt.size() - tp;
            if (m.tp + m.fp > 0) {
                CHECK(static_cast<double>(tp) / (tp + fp) <=
                      static_cast<double>(m.tp) / (m.tp + m.fp));
            }
            CHECK(static_cast<double>(tp) / (tp + fn) <=
                  static_cast<double>(m.tp) / (m.tp + m.fn));
        }
    }
}

TEST_CASE("best_f1_point picks the F1-maximizing prefix") {
    WorkedExample ex;
    const PRCurve curve = pr_curve(ex.dataset, ex.detections, 0.5);
    const auto op = best_f1_point(curve);
    REQUIRE(op.has_value());
    // prefixes: p=1,r=.5 (f1=2/3); p=.5,r=.5 (f1=.5); p=2/3,r=1 (f1=0.8)
    CHECK(op->score_threshold == 0.7);
    CHECK(op->f1 == doctest::Approx(0.8));
    CHECK(op->tp == 2);
    CHECK(op->fp == 1);
    CHECK(op->fn == 0);

    CHECK_FALSE(best_f1_point(PRCurve{}).has_value());
}

TEST_CASE("export_curve: empty curve writes a header-only CSV") {
    TempDir tmp;
    WorkedExample ex;
    const PRCurve curve = pr_curve(ex.dataset, {}, 0.5);
    export_curve(curve, tmp.path("empty.csv"));
    CHECK(testutil::read_file(tmp.path("empty.csv")) == "score,tp_cum,fp_cum,precision,recall\n");
}

TEST_CASE("export_curve: three points plus the 11-row interpolated block") {
    TempDir tmp;
    WorkedExample ex;
    const PRCurve curve = pr_curve(ex.dataset, ex.detections, 0.5);
    export_curve(curve, tmp.path("curve.csv"));
    const std::string text = testutil::read_file(tmp.path("curve.csv"));
    const std::size_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 1 + 3 + 1 + 11);  // header, data, second header, samples
    CHECK(text.find("recall_level,interpolated_precision") != std::string::npos);
}

TEST_CASE("export_curve round trip is byte-stable") {
    TempDir tmp;
    WorkedExample ex;
    const PRCurve curve = pr_curve(ex.dataset, ex.detections, 0.5);
    export_curve(curve, tmp.path("a.csv"));
    const std::string first = testutil::read_file(tmp.path("a.csv"));

    // parse the points back and re-export through a fresh curve object
    PRCurve parsed;
    parsed.iou_threshold = curve.iou_threshold;
    parsed.total_annotations = curve.total_annotations;
    std::istringstream in(first);
    std::string line;
    std::getline(in, line);  // header
    bool interp = false;
    std::size_t interp_index = 0;
    while (std::getline(in, line)) {
        if (line == "recall_level,interpolated_precision") {
            interp = true;
            continue;
        }
        std::istringstream fields(line);
        std::string field;
        std::vector<std::string> parts;
        while (std::getline(fields, field, ',')) parts.push_back(field);
        if (!interp) {
            PRPoint p;
            p.score = std::stod(parts[0]);
            p.tp_cum = std::stoul(parts[1]);
            p.fp_cum = std::stoul(parts[2]);
            p.precision = std::stod(parts[3]);
            p.recall = std::stod(parts[4]);
            parsed.points.push_back(p);
        } else {
            parsed.interpolated[interp_index++] = std::stod(parts[1]);
        }
    }
    export_curve(parsed, tmp.path("b.csv"));
    CHECK(testutil::read_file(tmp.path("b.csv")) == first);
}
