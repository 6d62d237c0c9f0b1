#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "pothole/box.hpp"
#include "pothole/nms.hpp"
#include "test_util.hpp"

using namespace pothole;

TEST_CASE("area of simple boxes") {
    CHECK(BoundingBox(0, 0, 10, 10).area() == 100.0);
    CHECK(BoundingBox(2, 3, 2.5, 7).area() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(BoundingBox(0, 0, 1, 1).area() == 1.0);
}

TEST_CASE("construction rejects degenerate and non-finite boxes") {
    CHECK_THROWS_AS(BoundingBox(0, 0, 0, 10), std::invalid_argument);
    CHECK_THROWS_AS(BoundingBox(0, 0, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(BoundingBox(5, 5, 5, 5), std::invalid_argument);
    CHECK_THROWS_AS(BoundingBox(10, 0, 0, 10), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(BoundingBox(0, 0, inf, 10), std::invalid_argument);
    CHECK_THROWS_AS(BoundingBox(nan, 0, 1, 1), std::invalid_argument);
    CHECK_FALSE(BoundingBox::make(1, 1, 1, 2).has_value());
    CHECK(BoundingBox::make(0, 0, 1, 1).has_value());
}

TEST_CASE("iou on the worked examples") {
    const BoundingBox a(0, 0, 10, 10);
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, BoundingBox(20, 20, 30, 30)) == 0.0);
    // |inter| = 50, |union| = 150
    CHECK(iou(a, BoundingBox(5, 0, 15, 10)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    // touching boxes do not overlap
    CHECK(iou(a, BoundingBox(10, 0, 20, 10)) == 0.0);
}

TEST_CASE("iou is symmetric and self-iou is exactly 1") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 500; ++i) {
        const BoundingBox a = testutil::random_box(rng);
        const BoundingBox b = testutil::random_box(rng);
        CHECK(iou(a, b) == iou(b, a));
        CHECK(iou(a, a) == 1.0);
        const double v = iou(a, b);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("iou is invariant under uniform scaling") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> scale(0.01, 50.0);
    for (int i = 0; i < 500; ++i) {
        const BoundingBox a = testutil::random_box(rng);
        const BoundingBox b = testutil::random_box(rng);
        const double s = scale(rng);
        CHECK(iou(a.scaled(s), b.scaled(s)) == doctest::Approx(iou(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("iou matches the pixel-set counting oracle on integer boxes") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> coord(0, 99);
    std::uniform_int_distribution<int> extent(1, 60);
    for (int i = 0; i < 500; ++i) {
        const int ax0 = coord(rng), ay0 = coord(rng);
        const int ax1 = std::min(100, ax0 + extent(rng)), ay1 = std::min(100, ay0 + extent(rng));
        const int bx0 = coord(rng), by0 = coord(rng);
        const int bx1 = std::min(100, bx0 + extent(rng)), by1 = std::min(100, by0 + extent(rng));
        const BoundingBox a(ax0, ay0, ax1, ay1);
        const BoundingBox b(bx0, by0, bx1, by1);
        const double counted = oracle::pixel_iou(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1);
        CHECK(iou(a, b) == doctest::Approx(counted).epsilon(1e-9));
    }
}

TEST_CASE("nms keeps the best of exact duplicates") {
    const BoundingBox b(0, 0, 10, 10);
    const auto kept = nms({{b, 0.9}, {b, 0.8}}, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms keeps disjoint boxes at any threshold") {
    const std::vector<ScoredBox> dets = {{BoundingBox(0, 0, 1, 1), 0.3},
                                         {BoundingBox(5, 5, 6, 6), 0.9},
                                         {BoundingBox(10, 10, 11, 11), 0.5}};
    for (double thr : {0.1, 0.5, 1.0}) {
        const auto kept = nms(dets, thr);
        CHECK(kept.size() == 3);
        CHECK(kept[0].score == 0.9);  // sorted by descending score
        CHECK(kept[1].score == 0.5);
        CHECK(kept[2].score == 0.3);
    }
}

TEST_CASE("nms suppresses the worked overlap example") {
    // IoU(A, B) = 1/3 >= 0.3
    const auto kept = nms({{BoundingBox(0, 0, 10, 10), 0.9},
                           {BoundingBox(5, 0, 15, 10), 0.8}},
                          0.3);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);
    CHECK(kept[0].box == BoundingBox(0, 0, 10, 10));
}

TEST_CASE("nms tie-break on equal scores is lexicographic") {
    const BoundingBox first(0, 0, 10, 10);
    const BoundingBox second(0, 1, 10, 11);  // IoU 9/11 with first
    const auto kept = nms({{second, 0.5}, {first, 0.5}}, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].box == first);
}

TEST_CASE("nms rejects invalid inputs") {
    CHECK_THROWS_AS(nms({}, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(nms({}, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(nms({{BoundingBox(0, 0, 1, 1), std::numeric_limits<double>::quiet_NaN()}}, 0.5),
                    std::invalid_argument);
}

TEST_CASE("nms output is a subset and suppressions are justified") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ScoredBox> dets;
        for (int i = 0; i < 40; ++i) dets.push_back({testutil::random_box(rng, 40.0), score(rng)});
        const double thr = 0.3 + 0.4 * score(rng);
        const auto kept = nms(dets, thr);

        // every kept box is an input box
        for (const ScoredBox& k : kept) {
            CHECK(std::count(dets.begin(), dets.end(), k) > 0);
        }
        // every suppressed box overlaps an earlier kept one with >= score
        for (const ScoredBox& d : dets) {
            if (std::count(kept.begin(), kept.end(), d) > 0) continue;
            bool justified = false;
            for (const ScoredBox& k : kept) {
                if (k.score >= d.score && iou(k.box, d.box) >= thr) {
                    justified = true;
                    break;
                }
            }
            CHECK(justified);
        }
        // kept boxes never suppress each other... pairwise IoU below threshold
        // only needs to hold against earlier (higher-score) keeps
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (std::size_t j = i + 1; j < kept.size(); ++j) {
                CHECK(iou(kept[i].box, kept[j].box) < thr);
            }
        }
    }
}
